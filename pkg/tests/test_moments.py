import numpy as np
import pytest

from treespec.catalog import long_leg_star, long_leg_star_split
from treespec.charfn import charfn_split, charfn_tree, charfn_zero_poly
from treespec.moments import (BasisError, UnsupportedPath, assemble_unknown, build_basis,
                              build_rhs_g, completeness_report, exact_kernel_transforms,
                              gauss_grid, pad_components, solve_moment_system)
from treespec.potential import EdgePotential, split_function
from treespec.spectrum import (NumberedSpectrum, Subspectrum, SubValue, alpha_profile,
                               find_roots, number_spectrum, select_subspectrum)
from treespec.tree import DIRICHLET as D, NEUMANN as N, make_split, star

STAR_POTS = {
    **dict(zip((11, 12), split_function(lambda x: 0.2 * np.cos(x), 2))),
    2: EdgePotential.from_function(lambda x: 0.1 * np.sin(x)),
    3: EdgePotential.from_function(lambda x: 0.05 * np.cos(2 * x)),
}


def spectra(tree, pots, variants, n_max):
    out = []
    for pid, ch in [("L", {})] + list(variants.items()):
        t = tree.with_bc(ch)
        ap = alpha_profile(charfn_zero_poly(t))
        out.append(number_spectrum(find_roots(charfn_tree(t, pots), (n_max + 1.5) ** 2), ap, pid))
    return out


@pytest.fixture(scope="module")
def star_system():
    tree = long_leg_star()
    specs = spectra(tree, STAR_POTS, {"L1": {2: D}}, 30)
    splits = {ns.problem_id: charfn_split(make_split(tree.with_bc(ch), 0, (2, 3)), STAR_POTS)
              for ns, ch in zip(specs, ({}, {2: D}))}
    sub = select_subspectrum(specs, 2, 1, 30)
    return sub, splits


def test_gauss_grid_integrates_trig_exactly():
    t, w = gauss_grid(2 * np.pi)
    assert np.sum(w) == pytest.approx(2 * np.pi, rel=1e-14)
    assert np.sum(w * np.cos(7.3 * t) ** 2) == pytest.approx(
        np.pi + np.sin(4 * 7.3 * np.pi) / (4 * 7.3), rel=1e-12)


def test_pads_sit_in_the_right_component():
    t = np.linspace(0, 1, 5)
    p1, p2 = pad_components(3, t)
    assert p1.shape == (2, 5)
    assert np.all(p1[0] == 0) and np.allclose(p2[0], 1.0)
    assert np.allclose(p1[1], t) and np.all(p2[1] == 0)


def test_r_zero_is_unsupported():
    sub = Subspectrum([SubValue("L", 0, 1, 0.2, 1.0)], [], 1, 0)
    with pytest.raises(UnsupportedPath):
        build_basis(sub, None)


def test_true_kernels_satisfy_moment_equations(star_system):
    sub, splits = star_system
    for pid in ("L", "L1"):
        cs = splits[pid]
        lam = np.array([v.lam for v in sub.by_problem(pid)])
        tn, tk = exact_kernel_transforms(cs, lam)
        kK, kP = cs.known_K(lam), cs.known_Pi(lam)
        rho = np.sqrt(lam)
        lhs = kK * tk / rho + kP * tn
        g = build_rhs_g(lam, kK, kP, cs.RK, cs.RPi, cs.r)
        assert np.max(np.abs(lhs - g) / (np.abs(kK) / rho + np.abs(kP))) < 1e-8


def test_even_r_moment_equations():
    tree = star([D, D, N])
    pots = {1: EdgePotential.from_function(lambda x: 0.1 * np.cos(x)),
            2: EdgePotential.from_function(lambda x: -0.1 * np.sin(x)),
            3: EdgePotential.from_function(lambda x: 0.05 * x)}
    cs = charfn_split(make_split(tree, 0, (3,)), pots)
    assert cs.r == 2
    lam = np.linspace(0.4, 90.0, 60)
    tn, tk = exact_kernel_transforms(cs, lam)
    kK, kP = cs.known_K(lam), cs.known_Pi(lam)
    rho = np.sqrt(lam)
    delta = cs.delta(lam)
    # (f, s) - g equals rho^(r-1) Delta up to the common factor
    lhs = kK * tk + rho * kP * tn - build_rhs_g(lam, kK, kP, cs.RK, cs.RPi, cs.r)
    assert np.allclose(lhs, rho ** 2 * delta, atol=1e-8 * np.max(np.abs(rho ** 2 * delta)))


def test_assembled_functions_match_forward_ones(star_system):
    sub, splits = star_system
    bs = build_basis(sub, splits)
    tp, diag = solve_moment_system(bs)
    assert diag.cond < 1e3 and diag.residual < 1e-8
    first = splits["L"]
    K, Pi = assemble_unknown(tp, first.RK, first.RPi, first.r)
    lam = np.linspace(0.5, 200.0, 120)
    for got, ref in ((K(lam), first.unknown_K(lam)), (Pi(lam), first.unknown_Pi(lam))):
        assert np.max(np.abs(got - ref)) < 5e-3 * np.max(np.abs(ref))


def test_condition_limit_raises(star_system):
    sub, splits = star_system
    with pytest.raises(BasisError, match="not Riesz"):
        solve_moment_system(build_basis(sub, splits), max_cond=1.0)


def test_completeness_report_is_stable(star_system):
    sub, splits = star_system
    rep = completeness_report(build_basis(sub, splits), n_max_list=(10, 20, 30))
    assert rep.growth < 2.0
    assert set(rep.cos2alpha) == {1, 2}


def test_known_side_only_splits_are_enough(star_system):
    sub, splits = star_system
    known_only = {pid: charfn_split(cs.split, STAR_POTS, forward=False)
                  for pid, cs in splits.items()}
    a = build_basis(sub, splits).g
    b = build_basis(sub, known_only).g
    assert np.array_equal(a, b)
