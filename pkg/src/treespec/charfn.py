"""Characteristic functions of trees.

Every branch hanging at a vertex u is summarized by two functions: D (the
branch problem with y(u) = 0) and N (with the one-edge Kirchhoff condition at
u). Gluing branches at a vertex gives

    P = prod D_i,    Q = sum_i N_i prod_{k != i} D_k,

and the characteristic function of the whole tree is Q taken at any internal
vertex. The same recursion runs over numbers (arrays in lambda) and over the
symbolic zero-potential expressions of :class:`TrigExpr`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from numpy.polynomial import polynomial as P

from .cauchy import integrate_edge
from .potential import PI, EdgePotential
from .tree import DIRICHLET, SubtreeSplit, TreeError, TreeSpec, check


class ParityError(ArithmeticError):
    """Zero-potential polynomial has the wrong symmetry (a recursion bug)."""


# ---------------------------------------------------------------------------
# numeric recursion

def _glue(pairs):
    """(P, Q) for branches given as (D, N) pairs meeting at one vertex."""
    prod = None
    for d, _ in pairs:
        prod = d if prod is None else prod * d
    total = None
    for i, (_, n) in enumerate(pairs):
        term = n
        for k, (d, _) in enumerate(pairs):
            if k != i:
                term = term * d
        total = term if total is None else total + term
    return prod, total


def _branch(tree: TreeSpec, u: int, e, ent, memo):
    """(D, N) of the branch hanging at ``u`` through edge ``e``."""
    key = (u, e.id)
    if key in memo:
        return memo[key]
    v = e.other(u)
    C, Cq, S, Sq = ent[e.id]
    at_tail = u == e.tail
    if tree.degree(v) == 1:
        if tree.bc[v] == DIRICHLET:
            out = (S, C) if at_tail else (S, Sq)
        else:
            out = (Sq, Cq) if at_tail else (C, Cq)
    else:
        sub = [_branch(tree, v, f, ent, memo) for f in tree.incident(v) if f.id != e.id]
        p, q = _glue(sub)
        if at_tail:
            out = (Sq * p + S * q, Cq * p + C * q)
        else:
            out = (C * p + S * q, Cq * p + Sq * q)
    memo[key] = out
    return out


def _delta(tree: TreeSpec, root: int, ent):
    memo = {}
    branches = [_branch(tree, root, e, ent, memo) for e in tree.incident(root)]
    if len(branches) == 1:
        d, n = branches[0]
        return d if tree.bc[root] == DIRICHLET else n
    return _glue(branches)[1]


def _numeric_entries(tree, pots, lam, tol, rescale=False):
    ent = {}
    for e in tree.edges:
        t = integrate_edge(_pot(pots, e.id), lam, tol)
        g = tree.gamma[e.id]
        vals = (t.C, t.Cq + g * t.C, t.S, t.Sq + g * t.S)
        if rescale:
            # divide by exp(tau*pi): Delta is multilinear in the edge entries
            f = np.exp(-np.sqrt(np.maximum(-np.asarray(lam, float), 0.0)) * PI)
            vals = tuple(v * f for v in vals)
        ent[e.id] = vals
    return ent


def _pot(pots, eid) -> EdgePotential:
    p = pots.get(eid) if pots is not None else None
    return EdgePotential.zero() if p is None else p


def _default_root(tree: TreeSpec) -> int:
    internal = tree.internal
    return internal[0] if internal else tree.boundary[0]


# ---------------------------------------------------------------------------
# public types

@dataclass(frozen=True)
class CharFn:
    """An entire function of lambda, real on the real axis."""

    func: Callable
    d: int
    m: int
    asym_const: float
    name: str = ""
    log_abs: Callable | None = field(default=None, repr=False)

    def __call__(self, lam, tol: float | None = None):
        """Evaluate; ``tol`` overrides the integration tolerance if given."""
        return self.func(lam) if tol is None else self.func(lam, tol=tol)


def asym_constant(tree: TreeSpec) -> float:
    """2^-m times the product of the vertex degrees."""
    return float(np.prod([tree.degree(v) for v in tree.vertices])) / 2.0 ** tree.m


def charfn_single_edge(pot: EdgePotential, gamma: float, bc0: str, bc_pi: str,
                       tol: float = 1e-10) -> CharFn:
    """One edge with conditions ``bc0`` at x = 0 and ``bc_pi`` at x = pi."""
    from .tree import Edge
    tree = TreeSpec((0, 1), (Edge(1, 0, 1),), {0: bc0, 1: bc_pi}, {1: gamma})
    return charfn_tree(tree, {1: pot}, root=0, tol=tol)


def charfn_tree(tree: TreeSpec, pots: Mapping[int, EdgePotential] | None,
                root: int | None = None, tol: float = 1e-10) -> CharFn:
    """Characteristic function of ``tree``; missing potentials are zero."""
    check(tree)
    root = _default_root(tree) if root is None else root
    if root not in tree.vertices:
        raise TreeError(f"root {root} is not a vertex")

    def func(lam, tol=tol):
        return _delta(tree, root, _numeric_entries(tree, pots, lam, tol))

    def log_abs(lam):
        lam = np.asarray(lam, float)
        tau = np.sqrt(np.maximum(-lam, 0.0))
        val = _delta(tree, root, _numeric_entries(tree, pots, lam, tol, rescale=True))
        with np.errstate(divide="ignore"):
            return np.log(np.abs(val)) + tree.m * tau * PI

    return CharFn(func, tree.d, tree.m, asym_constant(tree), "Delta", log_abs)


# ---------------------------------------------------------------------------
# symbolic zero-potential expressions

def _trim(a):
    a = np.asarray(a, dtype=float)
    nz = np.nonzero(np.abs(a) > 0)[0]
    return a[: nz[-1] + 1] if nz.size else np.zeros(0)


@dataclass(frozen=True)
class TrigExpr:
    """sum_k rho^k (A_k(c) + s*B_k(c)) with c = cos(rho*pi), s = sin(rho*pi).

    ``terms`` maps the power k to coefficient arrays (A_k, B_k), lowest degree
    first. Products use s^2 = 1 - c^2, so every expression stays in this form.
    """

    terms: Mapping[int, tuple[np.ndarray, np.ndarray]]

    @classmethod
    def make(cls, k: int, a=(), b=()) -> "TrigExpr":
        return cls({k: (_trim(a), _trim(b))})._clean()

    def _clean(self) -> "TrigExpr":
        out = {}
        for k, (a, b) in self.terms.items():
            a, b = _trim(a), _trim(b)
            if a.size or b.size:
                out[k] = (a, b)
        return TrigExpr(out)

    def __add__(self, other: "TrigExpr") -> "TrigExpr":
        out = dict(self.terms)
        for k, (a, b) in other.terms.items():
            if k in out:
                a0, b0 = out[k]
                out[k] = (_pa(a0, a), _pa(b0, b))
            else:
                out[k] = (a, b)
        return TrigExpr(out)._clean()

    def __mul__(self, other: "TrigExpr") -> "TrigExpr":
        one_minus_c2 = np.array([1.0, 0.0, -1.0])
        out = TrigExpr({})
        for k1, (a1, b1) in self.terms.items():
            for k2, (a2, b2) in other.terms.items():
                a = _pa(_pm(a1, a2), _pm(one_minus_c2, _pm(b1, b2)))
                b = _pa(_pm(a1, b2), _pm(b1, a2))
                out = out + TrigExpr({k1 + k2: (a, b)})
        return out

    def __neg__(self) -> "TrigExpr":
        return TrigExpr({k: (-a, -b) for k, (a, b) in self.terms.items()})

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def power(self) -> int:
        """The single rho power of a homogeneous expression."""
        if len(self.terms) != 1:
            raise ValueError(f"expression mixes rho powers {sorted(self.terms)}")
        return next(iter(self.terms))

    def __call__(self, rho):
        rho = np.asarray(rho)
        c, s = np.cos(rho * PI), np.sin(rho * PI)
        out = np.zeros(np.broadcast(rho).shape, dtype=np.result_type(rho, float))
        for k, (a, b) in self.terms.items():
            part = _pv(c, a) + s * _pv(c, b)
            out = out + (part if k == 0 else rho ** k * part)
        return out

    def trig(self, rho):
        """Value with the rho^k factor left out (homogeneous expressions)."""
        a, b = self.terms[self.power] if self.terms else (np.zeros(0), np.zeros(0))
        rho = np.asarray(rho)
        c = np.cos(rho * PI)
        return _pv(c, a) + np.sin(rho * PI) * _pv(c, b)


def _pm(a, b):
    if not len(a) or not len(b):
        return np.zeros(0)
    return P.polymul(a, b)


def _pa(a, b):
    if not len(a):
        return np.asarray(b, float)
    if not len(b):
        return np.asarray(a, float)
    return P.polyadd(a, b)


def _pv(x, coeffs):
    if not len(coeffs):
        return np.zeros_like(x, dtype=float) if np.isrealobj(x) else np.zeros_like(x)
    return P.polyval(x, coeffs)


def _zero_entries(tree: TreeSpec):
    c = TrigExpr.make(0, [0.0, 1.0])
    ent = (c, TrigExpr.make(1, (), [-1.0]), TrigExpr.make(-1, (), [1.0]), c)
    return {e.id: ent for e in tree.edges}


@dataclass(frozen=True)
class TrigPolyForm:
    """Zero-potential characteristic function rho^(1-d) * R(rho).

    R = sin(rho pi) Q(cos rho pi) when d is even and Q(cos rho pi) when d is
    odd; ``q`` holds the coefficients of Q, lowest degree first.
    """

    q: np.ndarray
    has_sin: bool
    d: int
    m: int

    @property
    def degree(self) -> int:
        return len(self.q) - 1

    def R(self, rho):
        rho = np.asarray(rho)
        val = P.polyval(np.cos(rho * PI), self.q)
        return np.sin(rho * PI) * val if self.has_sin else val

    def __call__(self, lam):
        rho = np.sqrt(np.asarray(lam, dtype=complex))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = rho ** (1 - self.d) * self.R(rho)
        return np.real_if_close(out)

    def expr(self) -> TrigExpr:
        return (TrigExpr.make(1 - self.d, (), self.q) if self.has_sin
                else TrigExpr.make(1 - self.d, self.q))


def check_parity(q, tol: float = 1e-12) -> None:
    """Q_k(-z) = (-1)^k Q_k(z): powers of the wrong parity vanish."""
    q = np.asarray(q, float)
    k = q.size - 1
    wrong = q[(k + 1) % 2::2]
    scale = max(1.0, float(np.max(np.abs(q)))) if q.size else 1.0
    if wrong.size and np.max(np.abs(wrong)) > tol * scale:
        raise ParityError(f"Q of degree {k} has wrong-parity coefficients {wrong}")


def charfn_zero_poly(tree: TreeSpec, root: int | None = None) -> TrigPolyForm:
    """Symbolic zero-potential form of the characteristic function (gamma = 0)."""
    check(tree)
    tree = TreeSpec(tree.vertices, tree.edges, tree.bc, {}, tree.split_vertex)
    root = _default_root(tree) if root is None else root
    expr = _delta(tree, root, _zero_entries(tree))
    return _to_form(expr, tree.d, tree.m)


def _to_form(expr: TrigExpr, d: int, m: int) -> TrigPolyForm:
    if expr.is_zero:
        raise ParityError("characteristic function vanishes identically")
    k = expr.power
    if k != 1 - d:
        raise ParityError(f"rho power {k}, expected {1 - d}")
    a, b = expr.terms[k]
    if d % 2 == 0:
        if a.size:
            raise ParityError("cosine-only part present although d is even")
        q, has_sin, want = b, True, m - 1
    else:
        if b.size:
            raise ParityError("sine part present although d is odd")
        q, has_sin, want = a, False, m
    check_parity(q)
    if q.size - 1 != want:
        raise ParityError(f"deg Q = {q.size - 1}, expected {want}")
    return TrigPolyForm(q, has_sin, d, m)


# ---------------------------------------------------------------------------
# decomposition at the split vertex

@dataclass(frozen=True)
class CharFnSplit:
    """K/Pi parts of both sides at the split vertex w.

    Delta = known_K * unknown_Pi + known_Pi * unknown_K. The zero-potential
    forms of the unknown side satisfy unknown_K0 = rho^(1-r) RK and
    unknown_Pi0 = rho^(-r) RPi.
    """

    split: SubtreeSplit
    known_K: CharFn
    known_Pi: CharFn
    unknown_K: CharFn | None
    unknown_Pi: CharFn | None
    RK: TrigExpr
    RPi: TrigExpr
    r: int
    delta: CharFn | None = None


def _side_parts(split: SubtreeSplit, ent, side: str):
    tree = split.tree
    memo = {}
    branches = [_branch(tree, split.w, e, ent, memo) for e in split.branches(side)]
    return _glue(branches)


def unknown_zero_forms(split: SubtreeSplit) -> tuple[TrigExpr, TrigExpr]:
    """(RK, RPi): the zero-potential K/Pi parts of the unknown side."""
    tree = TreeSpec(split.tree.vertices, split.tree.edges, split.tree.bc, {})
    ent = _zero_entries(tree)
    memo = {}
    branches = [_branch(tree, split.w, e, ent, memo) for e in split.branches("unknown")]
    pi0, k0 = _glue(branches)
    r = split.r
    # strip the rho powers so that RK, RPi are pure trigonometric polynomials
    if k0.power != 1 - r or pi0.power != -r:
        raise ParityError(f"unexpected rho powers {k0.power}, {pi0.power} for r={r}")
    return (TrigExpr({0: k0.terms[k0.power]}), TrigExpr({0: pi0.terms[pi0.power]}))


def charfn_split(split: SubtreeSplit, pots: Mapping[int, EdgePotential] | None,
                 tol: float = 1e-10, forward: bool = True) -> CharFnSplit:
    """K/Pi decomposition; ``forward=False`` builds only the known side.

    In inverse mode only potentials on known edges are read.
    """
    tree = split.tree
    known = set(split.known_edges)
    if not forward:
        pots = {k: v for k, v in (pots or {}).items() if k in known}
    elif pots is not None:
        missing = [e for e in tree.edge_ids if e not in pots]
        if missing:
            raise TreeError(f"missing potentials for edges {missing}")

    def parts(side, which):
        def f(lam, tol=tol):
            ent = _numeric_entries(tree, pots, lam, tol)
            p, q = _side_parts(split, ent, side)
            return q if which == "K" else p
        return f

    def side_cf(side, which):
        sub = split.known if side == "known" else split.unknown
        return CharFn(parts(side, which), sub.d, sub.m, asym_constant(sub),
                      f"{which}_{side}")

    RK, RPi = unknown_zero_forms(split)
    kK, kP = side_cf("known", "K"), side_cf("known", "Pi")
    if forward:
        uK, uP = side_cf("unknown", "K"), side_cf("unknown", "Pi")
        delta = charfn_tree(tree, pots, root=split.w, tol=tol)
    else:
        uK = uP = delta = None
    return CharFnSplit(split, kK, kP, uK, uP, RK, RPi, split.r, delta)


def split_residual(cs: CharFnSplit, lam) -> np.ndarray:
    """|Delta - (K_kn Pi_un + Pi_kn K_un)| / max(1, |Delta|)."""
    full = cs.delta(lam)
    parts = cs.known_K(lam) * cs.unknown_Pi(lam) + cs.known_Pi(lam) * cs.unknown_K(lam)
    return np.abs(full - parts) / np.maximum(1.0, np.abs(full))


# ---------------------------------------------------------------------------
# growth at lambda = -tau^2

@dataclass(frozen=True)
class GrowthReport:
    taus: np.ndarray
    ratios: np.ndarray
    tol: float

    @property
    def passed(self) -> bool:
        return bool(abs(self.ratios[-1] - 1.0) < self.tol)


def growth_check(cf: CharFn, taus=(5.0, 10.0, 20.0), tol: float = 0.05) -> GrowthReport:
    """|Delta(-tau^2)| against tau^(1-d) 2^-m prod|E_v| exp(m tau pi).

    Works with log-magnitudes so that large m*tau does not overflow.
    """
    if cf.log_abs is None:
        raise ValueError("characteristic function has no log-magnitude evaluator")
    taus = np.asarray(taus, float)
    got = cf.log_abs(-taus ** 2)
    want = (1 - cf.d) * np.log(taus) + np.log(cf.asym_const) + cf.m * taus * PI
    return GrowthReport(taus, np.exp(got - want), tol)
