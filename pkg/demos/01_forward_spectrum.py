"""Forward problem on a star with one long leg.

Builds the characteristic function, locates the eigenvalues, compares them
with the zero-potential targets n + alpha and shows how fast the
corrections kappa_n decay.

    python demos/01_forward_spectrum.py
"""
import numpy as np

from treespec.catalog import long_leg_star
from treespec.charfn import charfn_tree, charfn_zero_poly
from treespec.potential import EdgePotential, split_function
from treespec.spectrum import alpha_profile, find_roots, number_spectrum

tree = long_leg_star()
print("edges (id: tail -> head):", ", ".join(f"{e.id}: {e.tail}->{e.head}" for e in tree.edges))
print("boundary conditions:", tree.bc)

# sigma = 0.1 sin x along the long leg, cut into its two unit edges
leg = split_function(lambda x: 0.1 * np.sin(x), 2)
pots = {11: leg[0], 12: leg[1],
        2: EdgePotential.from_function(lambda x: 0.05 * np.cos(x)),
        3: EdgePotential.zero()}

# with zero potentials the eigenvalues sit at (n + alpha)^2
profile = alpha_profile(charfn_zero_poly(tree))
print("alpha values:", np.round(profile.alphas, 6))
print("multiplicity of the zero eigenvalue:", profile.zero_multiplicity)

delta = charfn_tree(tree, pots)
roots = find_roots(delta, lambda_max=15.5 ** 2)
numbered = number_spectrum(roots, profile)
print(f"\n{len(numbered.entries)} eigenvalues below 15.5^2")
print(f"{'n':>4} {'alpha':>9} {'lambda':>12} {'kappa':>11}")
for e in numbered.entries[:12]:
    print(f"{e.n:4d} {e.alpha:9.5f} {e.lam:12.6f} {e.kappa:11.3e}")

tail = [abs(e.kappa) for e in numbered.entries if abs(e.n) >= 10]
print(f"\nlargest |kappa_n| for |n| >= 10: {max(tail):.2e}")
