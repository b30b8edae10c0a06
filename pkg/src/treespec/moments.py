"""Moment system for the kernels (K, N) of the unknown side.

At every selected eigenvalue the decomposition Delta = K_kn Pi_un + Pi_kn K_un
vanishes. Writing the unknown-side functions through their zero-potential
parts plus transforms of (K, N) over (0, l*pi) turns each eigenvalue into one
linear equation (f, s(., lambda)) = g(lambda) for f = (K, N). With r the
number of Dirichlet ends of the unknown side:

odd r:   K_un = rho^(1-r) (RK + int N cos),  Pi_un = rho^(-r) (RPi + int K sin)
even r:  K_un = rho^(1-r) (RK + int N sin),  Pi_un = rho^(-r) (RPi + int K cos)

Analyticity at rho = 0 adds r - 1 monomial moment conditions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.linalg import eigh

from .charfn import CharFn, CharFnSplit, TrigExpr
from .potential import PI
from .spectrum import Subspectrum, SubValue


class BasisError(RuntimeError):
    """The normalized system is numerically not a Riesz basis."""


class UnsupportedPath(ValueError):
    pass


def gauss_grid(length: float, panel: float = 0.1, order: int = 20):
    """Composite Gauss-Legendre nodes and weights on [0, length]."""
    n_pan = max(1, int(np.ceil(length / panel)))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, length, n_pan + 1)
    h = np.diff(edges)
    t = (edges[:-1, None] + 0.5 * h[:, None] * (x[None, :] + 1.0)).ravel()
    wt = (0.5 * h[:, None] * w[None, :]).ravel()
    return t, wt


def _rho(lam):
    return np.sqrt(np.asarray(lam, dtype=complex))


def build_rhs_g(lam, known_K, known_Pi, RK: TrigExpr, RPi: TrigExpr, r: int):
    """Right-hand side g(lambda) from the known-side values at lambda > 0."""
    lam = np.asarray(lam, dtype=float)
    rho = np.sqrt(lam)
    kK, kP = np.asarray(known_K, float), np.asarray(known_Pi, float)
    if r % 2:
        return -kK * RPi(rho) / rho - kP * RK(rho)
    return -kK * RPi(rho) - rho * kP * RK(rho)


def _components(rho, kK, kP, t, r):
    """Row functions at the nodes: (first component, second component)."""
    rt = np.outer(rho, t)
    if r % 2:
        return kK[:, None] * np.sin(rt) / rho[:, None], kP[:, None] * np.cos(rt)
    return kK[:, None] * np.cos(rt), (kP * rho)[:, None] * np.sin(rt)


def pad_components(r: int, t: np.ndarray):
    """Monomial rows for j = 0..r-2 (first, second component)."""
    rows1, rows2 = [], []
    zero = np.zeros_like(t)
    for j in range(max(r - 1, 0)):
        mono = t ** j
        in_second = (j % 2 == 0) == bool(r % 2)
        rows1.append(zero if in_second else mono)
        rows2.append(mono if in_second else zero)
    return np.array(rows1).reshape(-1, t.size), np.array(rows2).reshape(-1, t.size)


@dataclass
class BasisSystem:
    """Normalized rows s_i/||s_i|| with g scaled alike.

    Row i is ``c1[i] * u(rho_i t), c2[i] * v(rho_i t)`` with the trigonometric
    pair (u, v) fixed by the parity of r; monomial pads follow the eigenvalue
    rows. ``A1``, ``A2`` hold the rows sampled at the quadrature nodes.
    """

    t: np.ndarray
    w: np.ndarray
    rho: np.ndarray         # eigenvalue rows only
    c1: np.ndarray
    c2: np.ndarray
    g: np.ndarray           # normalized right-hand side, pads last
    norms: np.ndarray
    problem_ids: list
    l: int
    r: int
    subspectrum: Subspectrum | None = field(default=None, repr=False)
    splits: Mapping | None = field(default=None, repr=False)

    def __post_init__(self):
        self.A1, self.A2 = self.rows_at(self.t)

    @property
    def length(self) -> float:
        return self.l * PI

    @property
    def lams(self) -> np.ndarray:
        return np.concatenate([self.rho ** 2, np.full(self.n_pads, np.nan)])

    @property
    def n_elements(self) -> int:
        return self.g.size

    @property
    def n_pads(self) -> int:
        return max(self.r - 1, 0)

    def rows_at(self, t):
        t = np.asarray(t, float)
        a1, a2 = _components(self.rho, self.c1, self.c2, t, self.r)
        p1, p2 = pad_components(self.r, t)
        pn = self.norms[self.rho.size:, None]
        return np.vstack([a1, p1 / pn]), np.vstack([a2, p2 / pn])

    def gram(self) -> np.ndarray:
        return (self.A1 * self.w) @ self.A1.T + (self.A2 * self.w) @ self.A2.T

    def inner(self, K, N) -> np.ndarray:
        """(f, s_i) for f sampled at the nodes, using normalized rows."""
        return (self.A1 * self.w) @ K + (self.A2 * self.w) @ N


def _split_for(splits, pid):
    if isinstance(splits, CharFnSplit):
        return splits
    if pid in splits:
        return splits[pid]
    raise KeyError(f"no known-side decomposition for problem {pid!r}")


def build_basis(sub: Subspectrum, splits, panel: float = 0.1, order: int = 20,
                shift: float = 0.0) -> BasisSystem:
    """Rows for every selected eigenvalue plus the monomial pads.

    ``splits`` maps problem ids to their decompositions (a single
    :class:`CharFnSplit` serves every problem). ``shift`` is added to each
    eigenvalue and is assumed to be built into the known-side functions.
    """
    r, l = sub.r, sub.l
    if r == 0:
        raise UnsupportedPath("r = 0 is not supported: the zero-potential form has a free constant")
    if not sub.values:
        raise BasisError("empty subspectrum")
    t, w = gauss_grid(l * PI, panel, order)
    first = _split_for(splits, sub.values[0].problem_id)
    RK, RPi = first.RK, first.RPi
    rhos, c1, c2, g, pids = [], [], [], [], []
    for pid in dict.fromkeys(v.problem_id for v in sub.values):
        cs = _split_for(splits, pid)
        lam = np.array([v.lam for v in sub.values if v.problem_id == pid]) + shift
        if np.any(lam <= 0):
            raise BasisError("non-positive eigenvalue in the subspectrum; use a shift")
        kK = np.asarray(cs.known_K(lam), float)
        kP = np.asarray(cs.known_Pi(lam), float)
        rhos.append(np.sqrt(lam))
        c1.append(kK)
        c2.append(kP)
        g.append(build_rhs_g(lam, kK, kP, RK, RPi, r))
        pids += [pid] * lam.size
    rho, c1, c2, g = (np.concatenate(x) for x in (rhos, c1, c2, g))
    a1, a2 = _components(rho, c1, c2, t, r)
    norms = np.sqrt((a1 ** 2) @ w + (a2 ** 2) @ w)
    if np.any(norms == 0):
        raise BasisError(f"zero-norm row at lambda={rho[norms == 0][0] ** 2:.6g} "
                         "(K and Pi both vanish)")
    p1, p2 = pad_components(r, t)
    pnorm = np.sqrt((p1 ** 2) @ w + (p2 ** 2) @ w)
    n_all = np.concatenate([norms, pnorm])
    g_all = np.concatenate([g / norms, np.zeros(p1.shape[0])])
    return BasisSystem(t, w, rho, c1 / norms, c2 / norms, g_all, n_all,
                       pids + ["pad"] * p1.shape[0], l, r, sub, splits)


@dataclass(frozen=True)
class GramDiagnostics:
    cond: float            # full condition number of the normalized Gram matrix
    cond_used: float       # after the spectral cutoff
    dropped: int
    residual: float        # ||G c - g|| / ||g||
    moment_residual: float
    n_elements: int


@dataclass
class TargetPair:
    """f = (K, N) on (0, l*pi) as a combination of the basis rows."""

    coeffs: np.ndarray
    basis: BasisSystem = field(repr=False)
    n_t: int = 1024

    @property
    def K_nodes(self) -> np.ndarray:
        return self.basis.A1.T @ self.coeffs

    @property
    def N_nodes(self) -> np.ndarray:
        return self.basis.A2.T @ self.coeffs

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.basis.length, self.n_t)

    def K(self, t=None) -> np.ndarray:
        a1, _ = self.basis.rows_at(self.grid if t is None else t)
        return self.coeffs @ a1

    def N(self, t=None) -> np.ndarray:
        _, a2 = self.basis.rows_at(self.grid if t is None else t)
        return self.coeffs @ a2

    def moment_residuals(self) -> np.ndarray:
        """|(f, s_j)| for the monomial conditions."""
        bs = self.basis
        n = bs.n_pads
        if not n:
            return np.zeros(0)
        return np.abs(bs.inner(self.K_nodes, self.N_nodes)[-n:])


def solve_moment_system(bs: BasisSystem, cutoff: float = 1e-10,
                        max_cond: float = 1e12, n_t: int = 1024):
    """Minimum-norm f in the span of the rows with (f, s_i) = g_i.

    The Gram matrix is inverted on eigenvalues above ``cutoff`` times the
    largest one. A full condition number above ``max_cond`` means the rows
    are numerically dependent at this truncation.
    """
    G = bs.gram()
    vals, vecs = eigh(G)
    top = vals[-1]
    keep = vals > cutoff * top
    cond = float(top / vals[0]) if vals[0] > 0 else np.inf
    if cond > max_cond:
        raise BasisError(f"basis not Riesz at this truncation (Gram condition {cond:.3e})")
    coeffs = vecs[:, keep] @ ((vecs[:, keep].T @ bs.g) / vals[keep])
    res = float(np.linalg.norm(G @ coeffs - bs.g) / max(np.linalg.norm(bs.g), 1e-300))
    tp = TargetPair(coeffs, bs, n_t)
    mres = tp.moment_residuals()
    diag = GramDiagnostics(cond, float(top / vals[keep][0]), int(np.sum(~keep)), res,
                           float(mres.max()) if mres.size else 0.0, bs.n_elements)
    return tp, diag


def _rho_floor(rho, r):
    floor = 1e-8 if r <= 1 else 1e-3
    small = np.abs(rho) < floor
    return np.where(small, floor, rho)


def transforms(K_nodes, N_nodes, t, w, rho, r):
    """(int N cos, int K sin) for odd r, (int N sin, int K cos) for even r."""
    rt = np.multiply.outer(rho, t)
    if r % 2:
        return (np.cos(rt) * w) @ N_nodes, (np.sin(rt) * w) @ K_nodes
    return (np.sin(rt) * w) @ N_nodes, (np.cos(rt) * w) @ K_nodes


def assemble_unknown(tp: TargetPair, RK: TrigExpr, RPi: TrigExpr, r: int,
                     shift: float = 0.0, chunk: int = 2048):
    """Unknown-side K and Pi functions rebuilt from the solved kernels.

    Both are evaluated with complex rho so that lambda < 0 works; ``shift``
    undoes a spectrum shift applied before the solve.
    """
    if r == 0:
        raise UnsupportedPath("r = 0 is not supported")
    bs = tp.basis
    Kn, Nn = tp.K_nodes, tp.N_nodes

    def parts(lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=float)) + shift
        k_out = np.empty(lam.shape, float)
        p_out = np.empty(lam.shape, float)
        flat_l = lam.ravel()
        for s in range(0, flat_l.size, chunk):
            rho = _rho_floor(_rho(flat_l[s:s + chunk]), r)
            tn, tk = transforms(Kn, Nn, bs.t, bs.w, rho, r)
            k_val = rho ** (1 - r) * (RK(rho) + tn)
            p_val = rho ** (-r) * (RPi(rho) + tk)
            k_out.ravel()[s:s + chunk] = k_val.real
            p_out.ravel()[s:s + chunk] = p_val.real
        return k_out, p_out

    def K(lam, tol=None):
        out = parts(lam)[0]
        return out if np.ndim(lam) else out[0]

    def Pi(lam, tol=None):
        out = parts(lam)[1]
        return out if np.ndim(lam) else out[0]

    sub_l = bs.l
    return (CharFn(K, 0, sub_l, 0.0, "K_unknown (assembled)"),
            CharFn(Pi, 0, sub_l, 0.0, "Pi_unknown (assembled)"))


def exact_kernel_transforms(cs: CharFnSplit, lam, shift: float = 0.0):
    """Transforms of the true kernels from forward unknown-side functions.

    Returns (int N cos-or-sin, int K sin-or-cos) at lambda, computed as
    rho^(r-1) K_un - RK and rho^r Pi_un - RPi.
    """
    lam = np.asarray(lam, float)
    rho = np.sqrt(lam + shift)
    r = cs.r
    tn = rho ** (r - 1) * cs.unknown_K(lam) - cs.RK(rho)
    tk = rho ** r * cs.unknown_Pi(lam) - cs.RPi(rho)
    return tn, tk


@dataclass(frozen=True)
class CompletenessReport:
    n_max: tuple
    cond: tuple
    assumptions: dict
    closeness: float | None
    tail_closeness: float | None
    cos2alpha: dict

    @property
    def growth(self) -> float:
        return self.cond[-1] / self.cond[0]


def _truncate(sub: Subspectrum, n_max: int) -> Subspectrum:
    return Subspectrum([v for v in sub.values if abs(v.n) <= n_max],
                       [v for v in sub.excluded if abs(v.n) <= n_max], sub.l, sub.r,
                       sub.report)


def completeness_report(bs: BasisSystem, cs=None, n_max_list=(10, 20, 40),
                        zero_splits=None, shift: float = 0.0) -> CompletenessReport:
    """Gram conditioning across truncations and closeness to the zero-potential system.

    ``zero_splits`` (problem id -> decomposition with zero potentials) enables
    the l2-closeness diagnostic: the normalized rows are compared with rows
    built from the zero-potential known side at rho = n + alpha.
    """
    from .spectrum import check_assumptions

    sub, splits = bs.subspectrum, bs.splits
    conds = []
    for n in n_max_list:
        b = build_basis(_truncate(sub, n), splits, shift=shift)
        G = b.gram()
        ev = np.linalg.eigvalsh(G)
        conds.append(float(ev[-1] / ev[0]) if ev[0] > 0 else np.inf)
    rep = check_assumptions(sub, cs if cs is not None else splits) if (cs or splits) else {}
    closeness = tail = None
    if zero_splits is not None:
        zvals = [SubValue(v.problem_id, v.n, v.k, v.alpha, (v.n + v.alpha) ** 2)
                 for v in sub.values]
        zsub = Subspectrum(zvals, [], sub.l, sub.r)
        zb = build_basis(zsub, zero_splits)
        real = ~np.isnan(bs.lams)
        d1, d2 = bs.A1[real], bs.A2[real]
        z1, z2 = zb.A1[~np.isnan(zb.lams)], zb.A2[~np.isnan(zb.lams)]
        sign = np.sign(np.sum((d1 * z1 + d2 * z2) * bs.w, axis=1))
        sign[sign == 0] = 1.0
        diff = np.sqrt(np.sum(((d1 - sign[:, None] * z1) ** 2 + (d2 - sign[:, None] * z2) ** 2)
                              * bs.w, axis=1))
        closeness = float(np.sqrt(np.sum(diff ** 2)))
        ns = np.array([v.n for v in sub.values])
        far = np.abs(ns) > np.max(np.abs(ns)) // 2
        tail = float(np.sqrt(np.sum(diff[far] ** 2)))
    alphas = {v.k: v.alpha for v in sub.values}
    cos2 = {k: float(np.cos(2 * np.pi * a)) for k, a in sorted(alphas.items())}
    return CompletenessReport(tuple(n_max_list), tuple(conds), rep, closeness, tail, cos2)
