"""Partial inverse problem: recover the long leg of a star.

The two unit legs and their potentials are known. Two spectra are
generated from a hidden potential on the long leg: the base problem and a
variant with the Dirichlet condition at the end of leg 2. The solver only
sees the known legs and the two numbered spectra.

    python demos/02_recover_long_leg.py
"""
import time

import numpy as np

from treespec.catalog import long_leg_star
from treespec.charfn import charfn_tree, charfn_zero_poly
from treespec.interval import solve_partial_inverse
from treespec.potential import EdgePotential, split_function
from treespec.spectrum import alpha_profile, find_roots, number_spectrum

N_MAX = 40
tree = long_leg_star()
variants = {"L1": {2: "D"}}

hidden = split_function(lambda x: 0.2 * np.cos(x), 2)
known = {2: EdgePotential.from_function(lambda x: 0.1 * np.sin(x)),
         3: EdgePotential.from_function(lambda x: 0.05 * np.cos(2 * x))}
truth = {11: hidden[0], 12: hidden[1], **known}

print("generating spectra ...")
spectra = {}
for pid, changes in [("L", {})] + list(variants.items()):
    t = tree.with_bc(changes)
    roots = find_roots(charfn_tree(t, truth), (N_MAX + 1.5) ** 2)
    spectra[pid] = number_spectrum(roots, alpha_profile(charfn_zero_poly(t)), pid)
    print(f"  {pid}: {len(spectra[pid].entries)} eigenvalues")

start = time.perf_counter()
result = solve_partial_inverse(tree, (2, 3), known, spectra, variants, n_max=N_MAX)
print(f"solved in {time.perf_counter() - start:.1f} s")
for stage in result.stages:
    print("  stage:", stage.get("stage"))

x = np.linspace(0.0, np.pi, 9)
for e in (11, 12):
    got, want = result.pots[e](x), truth[e](x)
    err = np.linalg.norm(got - want) / np.linalg.norm(want)
    print(f"\nedge {e}: relative error {err:.2e}")
    for xi, g, w in zip(x, got, want):
        print(f"  x={xi:5.3f}  recovered {g:+.5f}  true {w:+.5f}")
