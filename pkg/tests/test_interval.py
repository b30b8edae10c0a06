from dataclasses import replace

import numpy as np
import pytest

from treespec.catalog import double_fork, long_leg_star
from treespec.charfn import CharFn, TrigExpr, charfn_tree, charfn_zero_poly
from treespec.interval import (FitError, InverseError, TwoSpectra, carry_across, interlace,
                               interpolate_product, recover_sigma_interval, side_functions,
                               solve_partial_inverse, split_interlaced, weyl)
from treespec.potential import EdgePotential, split_function
from treespec.spectrum import alpha_profile, find_roots, number_spectrum
from treespec.tree import DIRICHLET as D, NEUMANN as N, chain

X = np.linspace(0.0, np.pi, 257)


def rel_l2(true, got):
    return np.linalg.norm(got(X) - true(X)) / np.linalg.norm(true(X))


def poly_cf(roots):
    return CharFn(lambda lam, tol=None: np.prod(np.subtract.outer(np.asarray(lam, float),
                                                                  np.asarray(roots)), axis=-1),
                  0, 0, 1.0)


def two_spectra(pot, n=25, far=D):
    t = chain(1, N, far)
    a = [lam for lam, _ in find_roots(charfn_tree(t, {1: pot}), 30.0 ** 2)][:n]
    b = [lam for lam, _ in find_roots(charfn_tree(t.with_bc({0: D}), {1: pot}), 30.0 ** 2)][:n]
    return a, b


def test_interlace():
    assert interlace(np.array([1.0, 3.0]), np.array([2.0, 4.0]))
    assert not interlace(np.array([1.0, 3.0]), np.array([0.5, 4.0]))


def test_two_spectra_rejects_non_interlacing():
    with pytest.raises(InverseError, match="non-interlacing"):
        TwoSpectra([1.0, 2.0, 3.0], [1.5, 1.7, 3.5])


def test_single_edge_two_spectra_recovery():
    truth = EdgePotential.from_function(lambda x: 0.2 * np.cos(x))
    got = recover_sigma_interval(TwoSpectra(*two_spectra(truth)), tol=1e-8)
    assert rel_l2(truth, got) < 1e-4


def test_two_spectra_path_of_two_edges():
    truth = split_function(lambda x: 0.15 * np.cos(x / 2), 2)
    t = chain(2, N, D)
    pots = dict(zip((1, 2), truth))
    a = [lam for lam, _ in find_roots(charfn_tree(t, pots), 15.0 ** 2)][:25]
    b = [lam for lam, _ in find_roots(charfn_tree(t.with_bc({0: D}), pots), 15.0 ** 2)][:25]
    got = recover_sigma_interval(TwoSpectra(a, b, n_edges=2), tol=1e-4)
    assert max(rel_l2(p, q) for p, q in zip(truth, got)) < 1e-2


def test_fit_reports_best_iterate_on_failure():
    truth = EdgePotential.from_function(lambda x: 0.2 * np.cos(x))
    with pytest.raises(FitError) as info:
        recover_sigma_interval(TwoSpectra(*two_spectra(truth)), tol=1e-14, max_iter=1)
    assert info.value.best is not None and info.value.best.misfit < 1.0


def test_weyl_rejects_common_zero():
    with pytest.raises(InverseError, match="A4"):
        weyl(poly_cf([2.0, 5.0]), poly_cf([2.0, 7.0]), 10.0)


def test_weyl_poles():
    m = weyl(poly_cf([3.0]), poly_cf([1.0, 6.0]), 10.0)
    assert np.allclose(m.poles, [1.0, 6.0])
    assert np.isinf(m(1.0)) and m(2.0) == pytest.approx(0.25)


def test_carry_across_inverts_the_edge():
    pots = {1: EdgePotential.from_function(lambda x: 0.1 * np.sin(x)),
            2: EdgePotential.from_function(lambda x: 0.2 * np.cos(2 * x))}
    t = chain(2, N, D)
    Pi0, K0 = side_functions(t, 0, pots)
    K1, Pi1 = carry_across(t, 1, 0, pots[1], K0, Pi0)
    rest = t.subtree([2], {1: N})
    Pi_ref, K_ref = side_functions(rest, 1, pots)
    lam = np.linspace(-1.0, 80.0, 50)
    assert np.allclose(K1(lam), K_ref(lam), atol=1e-8)
    assert np.allclose(Pi1(lam), Pi_ref(lam), atol=1e-8)


def test_split_interlaced():
    a, b = split_interlaced(np.array([1.0, 2.0, 3.0, 4.0, 5.0]))
    assert list(a) == [1.0, 3.0, 5.0] and list(b) == [2.0, 4.0]
    with pytest.raises(InverseError, match="ambiguous"):
        split_interlaced(np.array([1.0, 1.0 + 1e-14, 3.0]))


def test_product_interpolant_reproduces_kernel():
    R = TrigExpr.make(0, [0.0, 1.0])          # cos(rho pi)
    length = 2 * np.pi
    rho = np.arange(0, 40) / 2.0 + 0.1

    def kernel_transform(r):
        # int_0^L 0.3 sin(rho t) dt
        return 0.3 * (1 - np.cos(r * length)) / r

    values = (R(rho) + kernel_transform(rho)) / rho
    ip = interpolate_product(R, rho, values, length)
    probe = np.array([1.37, 4.9, 9.2])
    want = (R(probe) + kernel_transform(probe)) / probe
    assert np.allclose(ip(probe ** 2), want, atol=1e-3)


def forward(tree, pots, variants, n_max=40):
    out = {}
    for pid, ch in [("L", {})] + list(variants.items()):
        t = tree.with_bc(ch)
        roots = find_roots(charfn_tree(t, pots), (n_max + 2.5) ** 2)
        out[pid] = number_spectrum(roots, alpha_profile(charfn_zero_poly(t)), pid)
    return out


@pytest.fixture(scope="module")
def star_case():
    tree = long_leg_star()
    leg = split_function(lambda x: 0.2 * np.cos(x), 2)
    pots = {11: leg[0], 12: leg[1],
            2: EdgePotential.from_function(lambda x: 0.1 * np.sin(x)),
            3: EdgePotential.from_function(lambda x: 0.05 * np.cos(2 * x))}
    variants = {"L1": {2: D}}
    return tree, pots, variants, forward(tree, pots, variants, 30)


def test_partial_inverse_long_leg(star_case):
    tree, pots, variants, spectra = star_case
    known = {e: pots[e] for e in (2, 3)}
    res = solve_partial_inverse(tree, (2, 3), known, spectra, variants, n_max=30)
    for e in (11, 12):
        assert rel_l2(pots[e], res.pots[e]) < 5e-2
    assert res.assumptions["A1"].status == "pass"
    assert [s["stage"] for s in res.stages] == ["moments at 0", "peel at 0"]


def test_partial_inverse_needs_base_problem(star_case):
    tree, pots, variants, spectra = star_case
    with pytest.raises(InverseError, match="base problem"):
        solve_partial_inverse(tree, (2, 3), pots, {"L1": spectra["L1"]}, variants)


def test_partial_inverse_needs_known_potentials(star_case):
    tree, pots, variants, spectra = star_case
    with pytest.raises(InverseError, match="missing known"):
        solve_partial_inverse(tree, (2, 3), {2: pots[2]}, spectra, variants)


def test_partial_inverse_rejects_non_positive_data(star_case):
    tree, pots, variants, spectra = star_case
    lowered = {pid: replace(ns, entries=tuple(replace(e, lam=e.lam - 1.0) for e in ns.entries))
               for pid, ns in spectra.items()}
    with pytest.raises(InverseError, match="A1"):
        solve_partial_inverse(tree, (2, 3), pots, lowered, variants, n_max=12)


def test_partial_inverse_rejects_deep_branching():
    tree = double_fork()
    pots = {e: EdgePotential.zero() for e in tree.edge_ids}
    data = forward(tree, pots, {}, 12)
    with pytest.raises(InverseError):
        solve_partial_inverse(tree, (41, 42, 51, 52), pots, data, {}, n_max=12)
