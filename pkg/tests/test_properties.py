"""Property-based checks on random trees and potentials."""
import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from treespec.cauchy import integrate_edge
from treespec.charfn import TrigExpr, charfn_split, charfn_tree, charfn_zero_poly, split_residual
from treespec.interval import interlace, split_interlaced
from treespec.potential import EdgePotential
from treespec.spectrum import Entry, NumberedSpectrum, read_spectrum_csv, write_spectrum_csv
from treespec.tree import Edge, TreeSpec, branch_edges, make_split

SETTINGS = settings(max_examples=25, deadline=None,
                    suppress_health_check=[HealthCheck.function_scoped_fixture])


@st.composite
def trees(draw, min_edges=1, max_edges=8):
    m = draw(st.integers(min_edges, max_edges))
    edges = []
    for i in range(1, m + 1):
        parent = draw(st.integers(0, i - 1))
        a, b = (parent, i) if draw(st.booleans()) else (i, parent)
        edges.append(Edge(i, a, b))
    deg = {v: 0 for v in range(m + 1)}
    for e in edges:
        deg[e.tail] += 1
        deg[e.head] += 1
    bc = {v: draw(st.sampled_from("DN")) for v, d in deg.items() if d == 1}
    gamma = {e.id: draw(st.sampled_from([0.0, 0.0, 0.25, -0.4])) for e in edges}
    return TreeSpec(tuple(range(m + 1)), tuple(edges), bc, gamma)


@st.composite
def potentials(draw):
    coeffs = np.array(draw(st.lists(st.floats(-1, 1), min_size=1, max_size=4)))
    scale = draw(st.floats(0.0, 0.3))
    total = np.sum(np.abs(coeffs))
    coeffs = coeffs * (scale / total) if total > 1e-6 else np.zeros_like(coeffs)
    return EdgePotential.cosine_series(coeffs, n_grid=129)


def random_pots(tree, data):
    return {e: data.draw(potentials()) for e in tree.edge_ids}


@SETTINGS
@given(trees(min_edges=2), st.data())
def test_split_identity_random(tree, data):
    internal = tree.internal
    w = data.draw(st.sampled_from(internal))
    branches = tree.incident(w)
    k = data.draw(st.integers(1, len(branches) - 1))
    known = [j for e in branches[:k] for j in branch_edges(tree, w, e)]
    sp = make_split(tree, w, known)
    assert sp.l == sum(sp.l_j) and sp.r + sp.p == sum(sp.r_j)
    cs = charfn_split(sp, random_pots(tree, data))
    lam = np.linspace(-4.0, 300.0, 40)
    assert np.max(split_residual(cs, lam)) < 1e-9


@SETTINGS
@given(potentials(), st.lists(st.floats(-50, 5000), min_size=1, max_size=20))
def test_wronskian_random(pot, lams):
    t = integrate_edge(pot, np.array(lams))
    scale = np.abs(t.C * t.Sq) + np.abs(t.Cq * t.S)
    assert np.max(np.abs(t.wronskian - 1.0) / np.maximum(1.0, scale)) < 1e-9


@SETTINGS
@given(trees(), st.data())
def test_root_choice_does_not_matter(tree, data):
    pots = random_pots(tree, data)
    lam = np.linspace(0.2, 80.0, 15)
    ref = charfn_tree(tree, pots)(lam)
    v = data.draw(st.sampled_from(tree.vertices))
    got = charfn_tree(tree, pots, root=v)(lam)
    assert np.allclose(got, ref, atol=1e-9 * max(1.0, np.max(np.abs(ref))))


@SETTINGS
@given(trees(), st.data())
def test_reversing_an_edge_keeps_delta(tree, data):
    gamma0 = TreeSpec(tree.vertices, tree.edges, tree.bc, {})
    pots = random_pots(gamma0, data)
    e = data.draw(st.sampled_from(gamma0.edges))
    flipped = tuple(Edge(x.id, x.head, x.tail) if x.id == e.id else x for x in gamma0.edges)
    other = TreeSpec(gamma0.vertices, flipped, gamma0.bc)
    pots2 = dict(pots)
    pots2[e.id] = pots[e.id].reversed()
    lam = np.linspace(0.3, 60.0, 12)
    a, b = charfn_tree(gamma0, pots)(lam), charfn_tree(other, pots2)(lam)
    assert np.allclose(a, b, atol=1e-7 * max(1.0, np.max(np.abs(a))))


@SETTINGS
@given(trees())
def test_zero_poly_degree(tree):
    tp = charfn_zero_poly(tree)
    assert tp.degree == (tree.m - 1 if tree.d % 2 == 0 else tree.m)
    rho = np.linspace(0.1, 5.0, 30)
    num = charfn_tree(TreeSpec(tree.vertices, tree.edges, tree.bc), None)(rho ** 2)
    assert np.allclose(tp(rho ** 2), num, atol=1e-10 * max(1.0, np.max(np.abs(num))))


coef_lists = st.lists(st.floats(-2, 2), min_size=0, max_size=4)


@SETTINGS
@given(st.integers(-2, 2), coef_lists, coef_lists, st.integers(-2, 2), coef_lists, coef_lists,
       st.floats(0.1, 6.0))
def test_trig_expr_product(k1, a1, b1, k2, a2, b2, rho):
    e1, e2 = TrigExpr.make(k1, a1, b1), TrigExpr.make(k2, a2, b2)
    prod = e1 * e2
    assert np.isclose(prod(rho), e1(rho) * e2(rho), rtol=1e-9, atol=1e-9)


@SETTINGS
@given(st.lists(st.floats(0.01, 1e4), min_size=2, max_size=40, unique=True))
def test_split_interlaced_alternates(values):
    z = np.sort(np.array(values))
    if np.min(np.diff(np.sqrt(z))) < 1e-6:
        return
    a, b = split_interlaced(z)
    assert interlace(a, b)
    assert a.size + b.size == z.size


@SETTINGS
@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(0, 3), st.floats(0, 0.5),
                          st.floats(-1e4, 1e4)), min_size=1, max_size=30))
def test_spectrum_csv_round_trip(tmp_path_factory, rows):
    entries = tuple(Entry(n, k, a, lam, np.sign(lam) * np.sqrt(abs(lam)), 0.0)
                    for n, k, a, lam in rows)
    path = tmp_path_factory.mktemp("csv") / "s.csv"
    write_spectrum_csv(path, [NumberedSpectrum(entries, "L")])
    back = read_spectrum_csv(path)["L"].entries
    key = sorted((e.k, e.lam, e.n) for e in entries)
    assert sorted((e.k, e.lam, e.n) for e in back) == key
