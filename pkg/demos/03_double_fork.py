"""Recover three edges hanging off a fork.

The two long legs at the split vertex are known. The unknown side is one
edge that branches into two more, so the solver peels the first edge and
separates the two branches with the help of a second spectrum in which
the end of edge 2 switches from Neumann to Dirichlet.

    python demos/03_double_fork.py
"""
import numpy as np

from treespec.catalog import double_fork
from treespec.charfn import charfn_tree, charfn_zero_poly
from treespec.interval import solve_partial_inverse
from treespec.potential import EdgePotential, split_function
from treespec.spectrum import alpha_profile, find_roots, number_spectrum

F = EdgePotential.from_function
N_MAX = 40
tree = double_fork()
variants = {"L1": {2: "D"}}

leg4 = split_function(lambda x: 0.1 * np.cos(0.5 * x), 2)
leg5 = split_function(lambda x: -0.1 * np.sin(0.5 * x), 2)
known = {41: leg4[0], 42: leg4[1], 51: leg5[0], 52: leg5[1]}
hidden = {1: F(lambda x: 0.15 * np.cos(x)),
          2: F(lambda x: 0.1 * np.sin(x) - 0.05),
          3: F(lambda x: 0.1 * np.cos(2 * x) + 0.05 * x)}
truth = {**known, **hidden}

spectra = {}
for pid, changes in [("L", {})] + list(variants.items()):
    t = tree.with_bc(changes)
    profile = alpha_profile(charfn_zero_poly(t))
    print(f"{pid}: alpha values {np.round(profile.alphas, 5)}")
    spectra[pid] = number_spectrum(find_roots(charfn_tree(t, truth), (N_MAX + 1.5) ** 2),
                                   profile, pid)

result = solve_partial_inverse(tree, tuple(known), known, spectra, variants, n_max=N_MAX)
print("\nstages:")
for stage in result.stages:
    print("  ", stage.get("stage"))

x = np.linspace(0.0, np.pi, 257)
for e, pot in hidden.items():
    err = np.linalg.norm(result.pots[e](x) - pot(x)) / np.linalg.norm(pot(x))
    print(f"edge {e}: relative L2 error {err:.2e}")
