"""Potentials on the unknown side from its K/Pi functions at the split vertex.

The zeros of K_un and Pi_un are two spectra of the unknown subtree (Neumann
and Dirichlet at w). Potentials are fitted to such spectra by damped
least squares against the forward solver, using a truncated cosine series on
every unit edge. Branching inside the unknown side is resolved one vertex at
a time: the edge at w is moved to the known side, K/Pi are carried across it
with the inverse transfer matrix, and two branches meeting at the next vertex
are separated with an auxiliary problem whose outer boundary condition on one
branch is flipped.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .cauchy import integrate_edge
from .charfn import CharFn, _branch, _glue, _numeric_entries, _pot, charfn_split
from .moments import assemble_unknown, build_basis, solve_moment_system
from .potential import PI, EdgePotential, cosine_values
from .spectrum import (NumberedSpectrum, SubspectrumError, check_assumptions, find_roots,
                       select_subspectrum)
from .tree import DIRICHLET, NEUMANN, TreeSpec, branch_edges, make_split

POLE_TOL = 1e-6


class InverseError(RuntimeError):
    """A stage of the inverse problem failed; ``report`` holds the diagnostics."""

    def __init__(self, msg: str, stage: str = "", report=None, best=None):
        super().__init__(msg)
        self.stage = stage
        self.report = report
        self.best = best


# ---------------------------------------------------------------------------
# Weyl function and two spectra

def _zeros(cf, lam_max: float, lambda_min: float = -4.0) -> np.ndarray:
    out = []
    for lam, mult in find_roots(cf, lam_max, lambda_min=lambda_min):
        out += [lam] * mult
    return np.array(sorted(out))


@dataclass
class WeylFunction:
    """M = K / Pi with the zeros of Pi (the poles) precomputed."""

    K: CharFn
    Pi: CharFn
    poles: np.ndarray

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.asarray(self.K(lam) / self.Pi(lam), dtype=float)
        if self.poles.size:
            near = np.min(np.abs(np.subtract.outer(lam, self.poles)), axis=-1) < POLE_TOL
            val = np.where(near, np.inf, val)
        return val if val.ndim else float(val)


def weyl(K: CharFn, Pi: CharFn, lam_max: float, lambda_min: float = -4.0,
         rel: float = 1e-6) -> WeylFunction:
    """Weyl function at the split vertex; common zeros of K and Pi are rejected."""
    poles = _zeros(Pi, lam_max, lambda_min)
    if poles.size:
        kv = np.abs(K(poles))
        rho = np.sqrt(np.abs(poles))
        probe = np.maximum(np.concatenate([rho - 0.25, rho + 0.25]), 0.05) ** 2
        scale = np.abs(K(probe)).reshape(2, -1).max(axis=0)
        bad = kv < rel * scale
        if bad.any():
            raise InverseError(f"K and Pi share a zero near lambda={poles[bad][0]:.6g} "
                               "(assumption A4)", "weyl")
    return WeylFunction(K, Pi, poles)


def interlace(a: np.ndarray, b: np.ndarray) -> bool:
    """True when a_1 < b_1 < a_2 < b_2 < ... strictly."""
    a, b = np.sort(a), np.sort(b)
    if not 0 <= a.size - b.size <= 1:
        return False
    merged = np.empty(a.size + b.size)
    merged[0::2] = a
    merged[1::2] = b
    return bool(np.all(np.diff(merged) > 0))


@dataclass
class TwoSpectra:
    """Neumann-at-w and Dirichlet-at-w eigenvalues of a path of unit edges.

    ``far_bc`` is the condition at the other end of the path. The Neumann
    spectrum ``spec_a`` starts below the Dirichlet one.
    """

    spec_a: np.ndarray
    spec_b: np.ndarray
    far_bc: str = DIRICHLET
    n_edges: int = 1

    def __post_init__(self):
        self.spec_a = np.sort(np.asarray(self.spec_a, float))
        self.spec_b = np.sort(np.asarray(self.spec_b, float))
        if not np.all(np.isfinite(self.spec_a)) or not np.all(np.isfinite(self.spec_b)):
            raise InverseError("non-interlacing input: non-finite eigenvalues", "two-spectra")
        n = min(self.spec_a.size, self.spec_b.size)
        if not interlace(self.spec_a[:n], self.spec_b[:n]):
            raise InverseError("non-interlacing input", "two-spectra")

    @property
    def counts(self) -> tuple[int, int]:
        return self.spec_a.size, self.spec_b.size


# ---------------------------------------------------------------------------
# spectral-misfit fitting

def side_functions(tree: TreeSpec, root: int, pots, tol: float = 1e-10):
    """(Pi, K) of the branches of ``tree`` at ``root`` as characteristic functions."""
    def parts(lam, tol=tol):
        ent = _numeric_entries(tree, pots, lam, tol)
        memo = {}
        return _glue([_branch(tree, root, e, ent, memo) for e in tree.incident(root)])

    m = tree.m
    return (CharFn(lambda lam, tol=tol: parts(lam, tol)[0], 0, m, 0.0, "Pi"),
            CharFn(lambda lam, tol=tol: parts(lam, tol)[1], 0, m, 0.0, "K"))


@dataclass
class FitTarget:
    """Zeros of the K or Pi function at ``root`` after applying ``bc`` changes."""

    kind: str            # "K" or "Pi"
    zeros: np.ndarray
    bc: Mapping[int, str] = field(default_factory=dict)
    label: str = ""
    lam_lo: float = -4.0     # zeros are counted from here on, in data and model alike

    def __post_init__(self):
        if self.kind not in ("K", "Pi"):
            raise ValueError("target kind must be 'K' or 'Pi'")
        self.zeros = np.sort(np.asarray(self.zeros, float))
        if self.zeros.size == 0:
            raise ValueError("target without zeros")


@dataclass
class FitResult:
    pots: dict
    theta: np.ndarray
    misfit: float           # max relative eigenvalue mismatch
    history: list           # objective after every accepted step, starting value first
    n_iter: int
    converged: bool


class FitError(InverseError):
    pass


class _CountError(Exception):
    pass


class SpectralFit:
    """Cosine-series potentials on ``free_edges`` fitted to target zero sets.

    Every free unit edge carries sigma(x) = sum_k a_k cos(k x) plus one
    unknown height per prescribed jump position in ``jumps``. Residuals are
    eigenvalue mismatches divided by 2 max(1, rho), i.e. roughly mismatches
    in rho.
    """

    def __init__(self, tree: TreeSpec, root: int, free_edges: Sequence[int],
                 targets: Sequence[FitTarget], fixed: Mapping[int, EdgePotential] | None = None,
                 n_coef: int = 16, n_grid: int = 257, jumps: Mapping[int, Sequence[float]] | None = None,
                 tol_int: float = 1e-10, reg: float = 1e-10, fd_step: float = 1e-6):
        self.tree, self.root = tree, root
        self.free = list(free_edges)
        self.targets = list(targets)
        self.fixed = dict(fixed or {})
        self.n_coef, self.n_grid = n_coef, n_grid
        self.jumps = {e: tuple(jumps.get(e, ())) for e in self.free} if jumps else {e: () for e in self.free}
        self.tol_int, self.reg, self.fd_step = tol_int, reg, fd_step
        self._x = np.linspace(0.0, PI, n_grid)
        self._slices, start = {}, 0
        for e in self.free:
            n = n_coef + len(self.jumps[e])
            self._slices[e] = slice(start, start + n)
            start += n
        self.n_params = start
        self._trees = {}
        for t in self.targets:
            key = tuple(sorted(t.bc.items()))
            if key not in self._trees:
                self._trees[key] = tree.with_bc(t.bc) if t.bc else tree
        self._scale = [2.0 * np.maximum(1.0, np.sqrt(np.abs(t.zeros))) for t in self.targets]
        self._k = np.concatenate([np.concatenate([np.arange(n_coef), np.zeros(len(self.jumps[e]))])
                                  for e in self.free]) if self.free else np.zeros(0)

    # -- model ---------------------------------------------------------------
    def potentials(self, theta) -> dict:
        pots = dict(self.fixed)
        for e in self.free:
            p = theta[self._slices[e]]
            vals = cosine_values(p[:self.n_coef], self._x, PI)
            pots[e] = EdgePotential(vals, tuple(zip(self.jumps[e], p[self.n_coef:])))
        return pots

    def _function(self, target: FitTarget, pots) -> CharFn:
        tree = self._trees[tuple(sorted(target.bc.items()))]
        pi_fn, k_fn = side_functions(tree, self.root, pots, self.tol_int)
        return k_fn if target.kind == "K" else pi_fn

    def model_zeros(self, theta) -> list[np.ndarray]:
        pots = self.potentials(theta)
        out = []
        for t in self.targets:
            hi = (np.sqrt(max(t.zeros[-1], 0.0)) + 0.75) ** 2
            lo = t.lam_lo
            z = _zeros(self._function(t, pots), hi, lo)
            if z.size < t.zeros.size:
                raise _CountError(f"{t.label or t.kind}: model has {z.size} zeros, "
                                  f"data {t.zeros.size}")
            out.append(z[:t.zeros.size])
        return out

    def residuals(self, theta, zeros) -> np.ndarray:
        res = [(z - t.zeros) / s for z, t, s in zip(zeros, self.targets, self._scale)]
        res.append(np.sqrt(self.reg) * (1.0 + self._k) * theta)
        return np.concatenate(res)

    def misfit(self, zeros) -> float:
        return float(max(np.max(np.abs(z - t.zeros) / np.maximum(1.0, np.abs(t.zeros)))
                         for z, t in zip(zeros, self.targets)))

    def jacobian(self, theta, zeros) -> np.ndarray:
        """Zero sensitivities by implicit differentiation of F(lambda, theta) = 0."""
        pots0 = self.potentials(theta)
        blocks = []
        for t, z, s in zip(self.targets, zeros, self._scale):
            f0 = self._function(t, pots0)
            dl = 1e-6 * np.maximum(1.0, np.abs(z))
            dfdl = (f0(z + dl) - f0(z - dl)) / (2 * dl)
            base = f0(z)
            cols = np.empty((z.size, self.n_params))
            for j in range(self.n_params):
                th = theta.copy()
                th[j] += self.fd_step
                fj = self._function(t, self.potentials(th))(z)
                cols[:, j] = -(fj - base) / self.fd_step / dfdl
            blocks.append(cols / s[:, None])
        blocks.append(np.sqrt(self.reg) * np.diag(1.0 + self._k))
        return np.vstack(blocks)

    # -- optimizer -------------------------------------------------------------
    def run(self, theta0=None, tol: float = 1e-3, max_iter: int = 40,
            plateau: float = 1e-7) -> FitResult:
        """Levenberg-Marquardt from ``theta0`` (zero by default).

        Only steps that lower the objective are accepted, so the recorded
        history never increases. Raises :class:`FitError` with the best
        iterate when the misfit stays above ``tol``.
        """
        theta = np.zeros(self.n_params) if theta0 is None else np.asarray(theta0, float).copy()
        zeros = self.model_zeros(theta)
        res = self.residuals(theta, zeros)
        cost = 0.5 * float(res @ res)
        history = [cost]
        mu = None
        converged = False
        it = 0
        for it in range(1, max_iter + 1):
            J = self.jacobian(theta, zeros)
            A = J.T @ J
            g = J.T @ res
            dA = np.maximum(np.diag(A), 1e-12 * max(np.max(np.diag(A)), 1e-300))
            if mu is None:
                mu = 1e-3
            accepted = False
            while mu < 1e10:
                step = np.linalg.solve(A + mu * np.diag(dA), -g)
                try:
                    z_new = self.model_zeros(theta + step)
                except _CountError:
                    mu *= 4.0
                    continue
                r_new = self.residuals(theta + step, z_new)
                c_new = 0.5 * float(r_new @ r_new)
                if c_new < cost:
                    accepted = True
                    break
                mu *= 4.0
            if not accepted:
                converged = True  # no descent direction left at this damping
                break
            theta, zeros, res = theta + step, z_new, r_new
            drop = (cost - c_new) / max(cost, 1e-300)
            cost = c_new
            history.append(cost)
            mu = max(mu / 3.0, 1e-12)
            if drop < plateau or cost < 1e-28:
                converged = True
                break
        result = FitResult(self.potentials(theta), theta, self.misfit(zeros), history, it,
                           converged)
        if result.misfit > tol:
            raise FitError(f"spectral fit stalled at misfit {result.misfit:.3e} > tol {tol:.1e}",
                           "fit", best=result)
        return result


def recover_sigma_interval(ts: TwoSpectra, n_grid: int = 257, tol: float = 1e-3,
                           n_coef: int = 16, n_used: int | None = 25,
                           jumps: Sequence[float] = (), max_iter: int = 40):
    """Potential on a path of unit edges from its Neumann and Dirichlet spectra at x = 0.

    Returns one :class:`EdgePotential` for a single edge, otherwise a list in
    path order. ``jumps`` are prescribed jump positions on the first edge.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    n = ts.n_edges
    verts = tuple(range(n + 1))
    from .tree import Edge
    edges = tuple(Edge(j + 1, j, j + 1) for j in range(n))
    tree = TreeSpec(verts, edges, {0: NEUMANN, n: ts.far_bc})
    a, b = ts.spec_a, ts.spec_b
    if n_used is not None:
        a, b = a[:n_used], b[:n_used]
    targets = [FitTarget("K", a, label="Neumann at 0"), FitTarget("Pi", b, label="Dirichlet at 0")]
    fit = SpectralFit(tree, 0, [e.id for e in edges], targets, n_coef=n_coef, n_grid=n_grid,
                      jumps={1: tuple(jumps)} if jumps else None)
    res = fit.run(tol=tol, max_iter=max_iter)
    pots = [res.pots[e.id] for e in edges]
    return pots[0] if n == 1 else pots


# ---------------------------------------------------------------------------
# peeling

def _transfer_inverse(pot: EdgePotential, gamma: float, at_tail: bool, lam, tol):
    """Matrix mapping (Pi, K) at the near vertex to (Pi, K) at the far vertex."""
    t = integrate_edge(pot, lam, tol)
    C, Cq, S, Sq = t.C, t.Cq + gamma * t.C, t.S, t.Sq + gamma * t.S
    if at_tail:
        # forward: Pi = Sq P + S Q, K = Cq P + C Q
        return (C, -S, -Cq, Sq)
    # forward: Pi = C P + S Q, K = Cq P + Sq Q
    return (Sq, -S, -Cq, C)


def carry_across(tree: TreeSpec, edge_id: int, near: int, pot: EdgePotential,
                 K: CharFn, Pi: CharFn, tol: float = 1e-10):
    """(K, Pi) at the far end of ``edge_id`` from (K, Pi) of the branch at ``near``."""
    e = tree.edge(edge_id)
    at_tail = near == e.tail
    gamma = tree.gamma.get(edge_id, 0.0)

    def both(lam):
        lam = np.asarray(lam, float)
        a, b, c, d = _transfer_inverse(pot, gamma, at_tail, lam, tol)
        p, k = Pi(lam), K(lam)
        return a * p + b * k, c * p + d * k

    return (CharFn(lambda lam, tol=None: both(lam)[1], 0, 0, 0.0, f"K beyond {edge_id}"),
            CharFn(lambda lam, tol=None: both(lam)[0], 0, 0, 0.0, f"Pi beyond {edge_id}"))


@dataclass
class PeelState:
    """Unknown subtree ``unknown`` hanging at vertex ``w`` with its K/Pi there."""

    tree: TreeSpec
    w: int
    unknown: tuple
    K: CharFn
    Pi: CharFn
    pots: dict                # known and recovered potentials
    stages: list = field(default_factory=list)

    def subtree(self) -> TreeSpec:
        return self.tree.subtree(self.unknown)

    def branches(self):
        sub = self.subtree()
        return [e for e in sub.incident(self.w)] if self.w in sub.vertices else []


def _is_path(tree: TreeSpec, start: int) -> bool:
    return all(tree.degree(v) <= 2 for v in tree.vertices if v != start) and tree.degree(start) == 1


def _data_zeros(cf: CharFn, n: int, rho_max: float, lambda_min: float) -> np.ndarray:
    z = _zeros(cf, rho_max ** 2, lambda_min)
    return z[:n]


def peel_edge(state: PeelState, n_fit: int = 25, rho_max: float = 20.0, tol: float = 1e-2,
              n_coef: int = 16, lambda_min: float = -1.0, max_iter: int = 40) -> PeelState:
    """Recover the edge at ``w`` (one unknown branch) and move it to the known side.

    When the rest of the unknown side is a path the whole path is recovered at
    once and the returned state has no unknown edges left.
    """
    sub = state.subtree()
    branches = state.branches()
    if len(branches) != 1:
        raise InverseError("branching requires L_k subspectra", "peel")
    kz = _data_zeros(state.K, n_fit, rho_max, lambda_min)
    pz = _data_zeros(state.Pi, n_fit, rho_max, lambda_min)
    if min(kz.size, pz.size) < 3:
        raise InverseError("too few zeros of the assembled functions", "peel")
    ts = TwoSpectra(kz, pz)  # validates interlacing
    free = list(sub.edge_ids)
    fit = SpectralFit(sub, state.w, free,
                      [FitTarget("K", ts.spec_a, label="K", lam_lo=lambda_min),
                       FitTarget("Pi", ts.spec_b, label="Pi", lam_lo=lambda_min)],
                      n_coef=n_coef)
    res = fit.run(tol=tol, max_iter=max_iter)
    e = branches[0]
    path = _is_path(sub, state.w)
    keep = free if path else [e.id]
    pots = dict(state.pots)
    pots.update({j: res.pots[j] for j in keep})
    stage = {"stage": f"peel at {state.w}", "edges": keep, "misfit": res.misfit,
             "iterations": res.n_iter, "history": res.history,
             "zeros": (int(kz.size), int(pz.size))}
    stages = state.stages + [stage]
    if path:
        return PeelState(state.tree, state.w, (), state.K, state.Pi, pots, stages)
    v = e.other(state.w)
    K2, Pi2 = carry_across(state.tree, e.id, state.w, pots[e.id], state.K, state.Pi)
    rest = tuple(j for j in state.unknown if j != e.id)
    return PeelState(state.tree, v, rest, K2, Pi2, pots, stages)


def split_interlaced(zeros: np.ndarray, gap_tol: float = 1e-6):
    """Deal sorted zeros alternately into two lists, the smallest going first.

    A near-collision closer than ``gap_tol`` in rho makes the order ambiguous
    and aborts.
    """
    z = np.sort(np.asarray(zeros, float))
    rho = np.sign(z) * np.sqrt(np.abs(z))
    close = np.nonzero(np.diff(rho) < gap_tol)[0]
    if close.size:
        raise InverseError(f"ambiguous zero pairing near lambda={z[close[0]]:.6g}", "pairing")
    return z[0::2], z[1::2]


@dataclass
class ProductInterpolant:
    """rho F(rho^2) = R(rho) + int_0^L h(t) sin(rho t) dt, fitted to values at points.

    F is the product of the two Dirichlet-at-v functions of a branch with its
    outer condition before and after the flip.
    """

    R: object                 # TrigExpr with the zero-potential part
    t: np.ndarray
    w: np.ndarray
    h: np.ndarray
    cond: float
    residual: float

    def __call__(self, lam, tol=None):
        lam = np.asarray(lam, float)
        flat = lam.ravel()
        rho = np.sqrt(flat.astype(complex))
        rho = np.where(np.abs(rho) < 1e-8, 1e-8, rho)
        val = (self.R(rho) + (np.sin(np.multiply.outer(rho, self.t)) * self.w) @ self.h) / rho
        return val.real.reshape(lam.shape)


def interpolate_product(R, rho_pts: np.ndarray, values: np.ndarray, length: float,
                        cutoff: float = 1e-10, max_cond: float = 1e12) -> ProductInterpolant:
    """Minimum-norm kernel h matching rho_j F_j - R(rho_j) = int h sin(rho_j t)."""
    from .moments import gauss_grid
    t, w = gauss_grid(length)
    rows = np.sin(np.outer(rho_pts, t))
    norms = np.sqrt((rows ** 2) @ w)
    rows /= norms[:, None]
    rhs = (rho_pts * values - R(rho_pts)) / norms
    G = (rows * w) @ rows.T
    vals, vecs = np.linalg.eigh(G)
    cond = float(vals[-1] / vals[0]) if vals[0] > 0 else np.inf
    if cond > max_cond:
        raise InverseError(f"interpolation points do not form a Riesz system (condition {cond:.3e})",
                           "pairing")
    keep = vals > cutoff * vals[-1]
    c = vecs[:, keep] @ ((vecs[:, keep].T @ rhs) / vals[keep])
    h = rows.T @ c
    res = float(np.linalg.norm(G @ c - rhs) / max(np.linalg.norm(rhs), 1e-300))
    return ProductInterpolant(R, t, w, h, cond, res)


# ---------------------------------------------------------------------------
# orchestration

@dataclass
class PartialInverseResult:
    pots: dict                   # recovered potentials on the unknown edges
    stages: list
    functions: dict              # problem id -> (K_un, Pi_un) at the split vertex
    assumptions: dict
    kernels: object = None       # the solved (K, N) pair at the split vertex


def shifted(cf: CharFn, c: float) -> CharFn:
    """lambda -> cf(lambda - c)."""
    if c == 0:
        return cf
    return CharFn(lambda lam, tol=None: cf(np.asarray(lam, float) - c, tol=tol),
                  cf.d, cf.m, cf.asym_const, f"{cf.name} shifted")


def algorithm_one(tree: TreeSpec, w: int, known_edges, pots, spectra: Sequence[NumberedSpectrum],
                  variants: Mapping[str, Mapping[int, str]], n_max: int = 40, shift: float = 0.0,
                  cutoff: float = 1e-10):
    """Assemble K_un, Pi_un at ``w`` from the known side and numbered spectra.

    ``variants`` maps problem ids to boundary-condition changes relative to
    ``tree``; the first spectrum's problem supplies the unknown-side forms.
    """
    raw, splits = {}, {}
    for ns in spectra:
        t = tree.with_bc(variants.get(ns.problem_id, {}))
        cs = charfn_split(make_split(t, w, known_edges), pots, forward=False)
        raw[ns.problem_id] = cs
        if shift:
            cs = type(cs)(cs.split, shifted(cs.known_K, shift), shifted(cs.known_Pi, shift),
                          None, None, cs.RK, cs.RPi, cs.r, None)
        splits[ns.problem_id] = cs
    first = splits[spectra[0].problem_id]
    sp0 = first.split
    sub = select_subspectrum(list(spectra), sp0.l, sp0.r, n_max)
    rep = check_assumptions(sub, raw)
    lams = sub.lams + shift
    if lams.size and lams.min() <= 0:
        raise InverseError(f"assumption A1 fails: eigenvalue {lams.min() - shift:.6g} is not "
                           "positive; use a larger spectrum shift", "algorithm 1", rep)
    if rep["A1"].status == "fail" and "coincident" in rep["A1"].detail:
        raise InverseError(f"assumption A1 fails: {rep['A1'].detail}", "algorithm 1", rep)
    if rep["A2"].status == "fail":
        raise InverseError(f"assumption A2 fails: {rep['A2'].detail} "
                           f"(lambda={rep['A2'].witness:.6g})", "algorithm 1", rep)
    bs = build_basis(sub, splits, shift=shift)
    tp, diag = solve_moment_system(bs, cutoff=cutoff)
    K, Pi = assemble_unknown(tp, first.RK, first.RPi, first.r, shift=shift)
    info = {"stage": f"moments at {w}", "rows": bs.n_elements, "cond": diag.cond,
            "residual": diag.residual, "moment_residual": diag.moment_residual,
            "problems": [ns.problem_id for ns in spectra]}
    return K, Pi, info, rep, tp


def solve_partial_inverse(tree: TreeSpec, known_edges, pots_known: Mapping[int, EdgePotential],
                          spectra: Mapping[str, NumberedSpectrum],
                          variants: Mapping[str, Mapping[int, str]] | None = None,
                          w: int | None = None, n_max: int = 40, n_fit: int = 25,
                          shift: float = 0.0, tol: float = 1e-2, n_coef: int = 16,
                          max_iter: int = 40) -> PartialInverseResult:
    """Recover the potentials of the unknown side.

    ``spectra`` holds the numbered eigenvalues of the base problem ``"L"`` and
    of any auxiliary problems; ``variants`` gives each auxiliary problem's
    boundary-condition changes. Changes on the known side feed the moment
    system at ``w``; a change on the unknown side separates two branches that
    meet at an inner vertex.
    """
    variants = dict(variants or {})
    w = tree.split_vertex if w is None else w
    if w is None:
        raise InverseError("no split vertex given", "setup")
    known = set(known_edges)
    unknown = tuple(e for e in tree.edge_ids if e not in known)
    if not unknown:
        return PartialInverseResult({}, [{"stage": "nothing to recover"}], {}, {})
    if "L" not in spectra:
        raise InverseError("the base problem 'L' is missing", "setup")
    pots = {e: p for e, p in pots_known.items() if e in known}
    missing = known - set(pots)
    if missing:
        raise InverseError(f"missing known potentials for edges {sorted(missing)}", "setup")
    unknown_vertices = {v for e in unknown for v in (tree.edge(e).tail, tree.edge(e).head)} - {w}
    side_of = {pid: ("unknown" if any(v in unknown_vertices for v in ch) else "known")
               for pid, ch in variants.items()}
    first = [spectra["L"]] + [spectra[p] for p in spectra if p != "L" and side_of.get(p) == "known"]
    rho_max = n_max / 2.0
    # assembled functions lose accuracy for lambda below the shifted origin
    lambda_min = -1.0 - shift
    K, Pi, info, rep, tp = algorithm_one(tree, w, known, pots, first, variants, n_max, shift)
    functions = {"L": (K, Pi)}
    state = PeelState(tree, w, unknown, K, Pi, pots, [info])
    while state.unknown:
        branches = state.branches()
        if len(branches) == 1:
            state = peel_edge(state, n_fit, rho_max, tol, n_coef, lambda_min, max_iter)
            continue
        if len(branches) != 2:
            raise InverseError(f"vertex {state.w} has {len(branches)} unknown branches; "
                               "deep branching is not supported", "branching")
        state = _split_two_branches(state, spectra, variants, side_of, n_max, n_fit, rho_max,
                                    tol, n_coef, lambda_min, max_iter)
    recovered = {e: state.pots[e] for e in unknown}
    return PartialInverseResult(recovered, state.stages, functions, rep, tp)


def _dirichlet_pair_form(tree: TreeSpec, v: int, comp, changes):
    """Zero-potential rho * D * D' for the branch ``comp`` at ``v`` (D' after ``changes``)."""
    from .charfn import TrigExpr, _zero_entries
    part = tree.subtree(comp)
    flipped = part.with_bc(changes)
    out = []
    for t in (part, flipped):
        t0 = TreeSpec(t.vertices, t.edges, t.bc, {})
        (e,) = t0.incident(v)
        out.append(_branch(t0, v, e, _zero_entries(t0), {})[0])
    prod = out[0] * out[1]
    if prod.power != -1:
        raise InverseError("flip must change a Neumann end into a Dirichlet one or back",
                           "pairing")
    return TrigExpr({0: prod.terms[-1]}), out


def _split_two_branches(state: PeelState, spectra, variants, side_of, n_max, n_fit, rho_max,
                        tol, n_coef, lambda_min, max_iter) -> PeelState:
    tree, v = state.tree, state.w
    sub = state.subtree()
    branches = state.branches()
    comps = {e.id: set(branch_edges(sub, v, e)) for e in branches}
    for eid, comp in comps.items():
        if not _is_path(sub.subtree(comp), v):
            raise InverseError(f"branch through edge {eid} at vertex {v} branches again; "
                               "deep branching is not supported", "branching")
    # auxiliary problem flipping a boundary condition on one of the branches
    flipped = None
    for pid, ch in variants.items():
        if side_of.get(pid) != "unknown" or pid not in spectra:
            continue
        for eid, comp in comps.items():
            verts = {x for j in comp for x in (tree.edge(j).tail, tree.edge(j).head)} - {v}
            if set(ch) <= verts:
                flipped = (pid, eid)
                break
        if flipped:
            break
    if flipped is None:
        raise InverseError(f"branching requires L_k subspectra at vertex {v}", "branching")
    pid, eid_a = flipped
    changes = dict(variants[pid])
    comp_a = comps[eid_a]
    comp_b = set().union(*(c for e, c in comps.items() if e != eid_a))

    # Weyl ratio of the auxiliary problem at its eigenvalues, from the known side
    known_now = tuple(e for e in tree.edge_ids if e not in state.unknown)
    vtree = tree.with_bc(changes)
    cs = charfn_split(make_split(vtree, v, known_now), state.pots, forward=False)
    ns = spectra[pid]
    if not ns.branches:
        raise InverseError(f"problem {pid} has no usable subsequence", "pairing")
    pts = np.array([e.lam for e in ns.branch(ns.branches[0]) if abs(e.n) <= n_max])
    kk, pk = cs.known_K(pts), cs.known_Pi(pts)
    mb = state.K(pts) / state.Pi(pts)
    ok = (np.abs(pk) > 1e-8 * np.max(np.abs(pk))) & np.isfinite(mb) & (pts > 0)
    pts, diff = pts[ok], (-kk / pk - mb)[ok]
    values = 1.0 / diff
    R, (d0, d1) = _dirichlet_pair_form(sub, v, comp_a, changes)
    rho_pts = np.sqrt(pts)
    # the Wronskian identity fixes F up to a sign; match it to the zero-potential form
    sign = np.sign(np.sum(values * R(rho_pts) / rho_pts))
    interp = interpolate_product(R, rho_pts, sign * values, 2 * PI * len(comp_a))
    F = CharFn(interp, 0, 2 * len(comp_a), 0.0, "D*D'")
    zeros = _zeros(F, rho_max ** 2, lambda_min)
    # the branch whose zero-potential Dirichlet function vanishes first leads
    probe = np.linspace(0.05, 2.0, 400)
    first0 = probe[np.argmax(np.abs(np.diff(np.sign(d0(probe)))) > 0)]
    first1 = probe[np.argmax(np.abs(np.diff(np.sign(d1(probe)))) > 0)]
    lead, follow = split_interlaced(zeros)
    za, za1 = (lead, follow) if first0 < first1 else (follow, lead)
    za, za1 = za[:n_fit], za1[:n_fit]
    if min(za.size, za1.size) < 3:
        raise InverseError(f"too few zeros for the flipped branch at vertex {v}", "pairing")
    targets = [FitTarget("Pi", za, label="flipped branch, base", lam_lo=lambda_min),
               FitTarget("Pi", za1, changes, label="flipped branch, auxiliary",
                         lam_lo=lambda_min)]
    fit_a = SpectralFit(sub.subtree(comp_a), v, sorted(comp_a), targets, n_coef=n_coef)
    res_a = fit_a.run(tol=tol, max_iter=max_iter)
    pots = dict(state.pots)
    pots.update({j: res_a.pots[j] for j in comp_a})
    # the other branch with the first one fixed, from K and Pi at v
    kz = _data_zeros(state.K, n_fit, rho_max, lambda_min)
    pz = _data_zeros(state.Pi, n_fit, rho_max, lambda_min)
    fit_b = SpectralFit(sub, v, sorted(comp_b),
                        [FitTarget("K", kz, label="K", lam_lo=lambda_min),
                         FitTarget("Pi", pz, label="Pi", lam_lo=lambda_min)],
                        fixed={j: pots[j] for j in comp_a}, n_coef=n_coef)
    res_b = fit_b.run(tol=tol, max_iter=max_iter)
    pots.update({j: res_b.pots[j] for j in comp_b})
    stages = state.stages + [
        {"stage": f"pairing at {v}", "auxiliary": pid, "flipped_branch": sorted(comp_a),
         "points": int(pts.size), "interp_cond": interp.cond, "zeros": (int(za.size), int(za1.size)),
         "misfit": res_a.misfit, "iterations": res_a.n_iter, "history": res_a.history},
        {"stage": f"remaining branch at {v}", "edges": sorted(comp_b), "misfit": res_b.misfit,
         "iterations": res_b.n_iter, "history": res_b.history}]
    return PeelState(tree, v, (), state.K, state.Pi, pots, stages)
