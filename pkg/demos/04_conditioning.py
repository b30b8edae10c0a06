"""How well posed is the moment system?

Compares the condition number of the Gram matrix of the moment system as
more eigenvalues are used, for the long-leg star (two spectra), and shows
the check report that flags a star whose two long legs are mirror images.

    python demos/04_conditioning.py
"""
import numpy as np

from treespec.catalog import long_leg_star, twin_leg_star, twin_leg_star_split
from treespec.charfn import charfn_split, charfn_tree, charfn_zero_poly
from treespec.moments import build_basis, solve_moment_system
from treespec.potential import EdgePotential, split_function
from treespec.spectrum import (alpha_profile, check_assumptions, find_roots, number_spectrum,
                               select_subspectrum)
from treespec.tree import make_split

F = EdgePotential.from_function
SIZES = (10, 20, 40)


def report(name, tree, split, pots, variants):
    spectra = []
    for pid, changes in [("L", {})] + list(variants.items()):
        t = tree.with_bc(changes)
        roots = find_roots(charfn_tree(t, pots), (max(SIZES) + 1.5) ** 2)
        spectra.append(number_spectrum(roots, alpha_profile(charfn_zero_poly(t)), pid))
    splits = {ns.problem_id: charfn_split(make_split(tree.with_bc(variants.get(ns.problem_id, {})),
                                                     split.w, split.known_edges), pots)
              for ns in spectra}
    print(name)
    for n in SIZES:
        sub = select_subspectrum(spectra, split.l, split.r, n)
        cond = solve_moment_system(build_basis(sub, splits), max_cond=np.inf)[1].cond
        print(f"  n_max={n:3d}: {len(sub.values):4d} rows, Gram condition {cond:9.3f}")
    for key, check in check_assumptions(sub, splits).items():
        print(f"  {key}: {check.status} {check.detail}")


leg = split_function(lambda x: 0.2 * np.cos(x), 2)
star_pots = {11: leg[0], 12: leg[1], 2: F(lambda x: 0.1 * np.sin(x)),
             3: F(lambda x: 0.05 * np.cos(2 * x))}
tree = long_leg_star()
report("long-leg star, base and flipped spectra", tree, make_split(tree, 0, (2, 3)), star_pots,
       {"L1": {2: "D"}})

leg = split_function(lambda x: 0.05 * np.cos(x / 1.5), 3)
twin_pots = {11: leg[0], 12: leg[1], 13: leg[2], 21: leg[0], 22: leg[1], 23: leg[2],
             3: F(lambda x: 0.03 * np.sin(x))}
report("\ntwin-leg star with mirrored legs", twin_leg_star(), twin_leg_star_split(), twin_pots, {})
