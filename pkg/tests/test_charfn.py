import numpy as np
import pytest

import oracles as O
from treespec.catalog import double_fork, double_fork_split, long_leg_star
from treespec.charfn import (ParityError, TrigExpr, charfn_single_edge, charfn_split, charfn_tree,
                             charfn_zero_poly, check_parity, growth_check, split_residual)
from treespec.potential import EdgePotential
from treespec.tree import DIRICHLET as D, NEUMANN as N, Edge, TreeSpec, make_split, star

SMOOTH = {
    1: (lambda x: 0.2 * np.cos(x), lambda x: -0.2 * np.sin(x)),
    2: (lambda x: 0.1 * np.sin(x) - 0.05, lambda x: 0.1 * np.cos(x)),
    3: (lambda x: 0.15 * np.cos(2 * x), lambda x: -0.3 * np.sin(2 * x)),
    4: (lambda x: 0.05 * x, lambda x: 0.05 + 0 * x),
}


def lopsided_tree():
    edges = (Edge(1, 0, 1), Edge(2, 2, 1), Edge(3, 1, 3), Edge(4, 3, 4))
    return TreeSpec((0, 1, 2, 3, 4), edges, {0: D, 2: N, 4: N}, {1: 0.3, 4: -0.2})


def test_single_edge_dirichlet_zero_potential():
    lam = np.array([0.5, 2.0, 10.0])
    cf = charfn_single_edge(EdgePotential.zero(), 0.0, D, D)
    rho = np.sqrt(lam)
    assert np.allclose(cf(lam), np.sin(rho * np.pi) / rho, atol=1e-13)


@pytest.mark.parametrize("tree", [long_leg_star(), double_fork(), star([D, N, N, D])])
def test_symbolic_form_matches_numeric(tree):
    lam = np.linspace(0.1, 60.0, 50)
    num = charfn_tree(tree, None)(lam)
    sym = charfn_zero_poly(tree)(lam)
    assert np.allclose(num, sym, atol=1e-10 * np.max(np.abs(num)))


@pytest.mark.parametrize("tree", [long_leg_star(), double_fork(), lopsided_tree()])
def test_degree_and_parity(tree):
    tp = charfn_zero_poly(tree)
    assert tp.degree == (tree.m - 1 if tree.d % 2 == 0 else tree.m)
    check_parity(tp.q)


def test_parity_violation_detected():
    with pytest.raises(ParityError):
        check_parity([1.0, 0.5, 2.0, 0.0])


def test_root_independence():
    tree = lopsided_tree()
    pots = {e: EdgePotential.from_function(f) for e, (f, _) in SMOOTH.items()}
    lam = np.linspace(-2.0, 40.0, 30)
    vals = [charfn_tree(tree, pots, root=v)(lam) for v in tree.vertices]
    for v in vals[1:]:
        assert np.allclose(v, vals[0], atol=1e-9 * np.max(np.abs(vals[0])))


def test_eigenvalues_match_condition_matrix_oracle():
    from treespec.spectrum import find_roots
    tree = lopsided_tree()
    pots = {e: EdgePotential.from_function(f, n_grid=4097) for e, (f, _) in SMOOTH.items()}
    got = np.array([lam for lam, m in find_roots(charfn_tree(tree, pots), 9.0, lambda_min=0.0)])

    def entries(lam):
        return {e: O.cauchy_values(f, df, lam) for e, (f, df) in SMOOTH.items()}

    ref = O.matrix_eigenvalues(tree, entries, 3.0, step=0.005) ** 2
    assert got.size == ref.size
    assert np.allclose(got, ref, rtol=1e-6)


def test_split_identity_double_fork():
    pots = {e: EdgePotential.from_function(lambda x, k=e: 0.1 * np.cos(k * x))
            for e in double_fork().edge_ids}
    cs = charfn_split(double_fork_split(), pots)
    lam = np.linspace(-3.0, 400.0, 200)
    assert np.max(split_residual(cs, lam)) < 1e-9


def test_inverse_mode_ignores_unknown_potentials():
    sp = double_fork_split()
    pots = {e: EdgePotential.from_function(lambda x: 0.1 * np.sin(x)) for e in sp.tree.edge_ids}
    a = charfn_split(sp, pots, forward=False)
    b = charfn_split(sp, {e: pots[e] for e in sp.known_edges}, forward=False)
    lam = np.array([1.3, 7.0])
    assert a.unknown_K is None and np.array_equal(a.known_K(lam), b.known_K(lam))


def test_unknown_zero_forms_match_zero_potential_side():
    sp = make_split(long_leg_star(), 0, (2, 3))
    cs = charfn_split(sp, None)
    rho = np.linspace(0.3, 8.0, 40)
    lam = rho ** 2
    assert np.allclose(cs.unknown_K(lam), rho ** (1 - cs.r) * cs.RK(rho), atol=1e-10)
    assert np.allclose(cs.unknown_Pi(lam), rho ** (-cs.r) * cs.RPi(rho), atol=1e-10)


def test_trig_expr_product_uses_pythagoras():
    s = TrigExpr.make(0, (), [1.0])
    c = TrigExpr.make(0, [0.0, 1.0])
    one = s * s + c * c
    assert np.allclose(one(np.linspace(0, 3, 7)), 1.0)


def test_growth_ratio_zero_potential_star():
    rep = growth_check(charfn_tree(star([D, N, N]), None))
    assert rep.passed


def test_fork_inner_split_zero_potential_parts():
    # split at the inner fork vertex with edge 1 and both long legs known
    cs = charfn_split(make_split(double_fork(), 1, (1, 41, 42, 51, 52)), None)
    rho = np.linspace(0.3, 3.7, 41)
    c, s = np.cos(rho * np.pi), np.sin(rho * np.pi)
    assert np.allclose(cs.known_K(rho ** 2), 12 * c ** 5 - 14 * c ** 3 + 3 * c, atol=1e-12)
    assert np.allclose(cs.known_Pi(rho ** 2), s * (12 * c ** 4 - 10 * c ** 2 + 1) / rho,
                       atol=1e-12)
    # unknown side: edges 2 (outer N) and 3 (outer D)
    assert np.allclose(cs.unknown_K(rho ** 2), np.cos(2 * rho * np.pi), atol=1e-12)
