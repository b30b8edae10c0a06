"""Eigenvalues of characteristic functions, alpha-profiles and numbering."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import zeta

from .charfn import CharFn, CharFnSplit, TrigPolyForm

_GOLD = (np.sqrt(5.0) - 1.0) / 2.0
CSV_HEADER = "# treespec-csv v1"
CSV_COLUMNS = ("problem_id", "n", "k", "alpha_k", "rho", "lambda", "kappa")


class NumberingError(RuntimeError):
    pass


class AlphaError(ArithmeticError):
    pass


class SubspectrumError(ValueError):
    pass


# ---------------------------------------------------------------------------
# root finding

def _lam(s):
    return s * np.abs(s)


def _illinois(f, a, b, fa, fb, xtol, max_iter=200):
    """Vectorized Illinois false position on brackets [a, b] with fa*fb < 0.

    A bracket stops once it is narrower than ``xtol`` or two successive
    iterates agree to ``xtol / 4``.
    """
    a, b, fa, fb = (np.array(x, dtype=float) for x in (a, b, fa, fb))
    side = np.zeros(a.shape, dtype=int)
    root = 0.5 * (a + b)
    last = np.full(a.shape, np.nan)
    active = np.abs(b - a) > xtol
    for it in range(max_iter):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        aa, bb, ffa, ffb = a[idx], b[idx], fa[idx], fb[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            c = bb - ffb * (bb - aa) / (ffb - ffa)
        bad = ~np.isfinite(c) | (c <= np.minimum(aa, bb)) | (c >= np.maximum(aa, bb))
        if it % 16 == 15:
            bad[:] = True  # periodic bisection guards against slow one-sided steps
        c = np.where(bad, 0.5 * (aa + bb), c)
        fc = f(c)
        left = fc * ffa > 0  # root lies in [c, b]
        # Illinois: halve the stale end value when the same end survives twice
        sd = side[idx]
        new_fa = np.where(left, fc, np.where(sd == -1, 0.5 * ffa, ffa))
        new_fb = np.where(~left, fc, np.where(sd == 1, 0.5 * ffb, ffb))
        a[idx] = np.where(left, c, aa)
        b[idx] = np.where(left, bb, c)
        fa[idx], fb[idx] = new_fa, new_fb
        side[idx] = np.where(left, 1, -1)
        root[idx] = c
        still = (np.abs(b[idx] - a[idx]) > xtol) & (fc != 0)
        still &= ~(np.abs(c - last[idx]) <= 0.25 * xtol)
        last[idx] = c
        active[idx] = still
    narrow = np.abs(b - a) <= xtol
    root[narrow] = 0.5 * (a + b)[narrow]
    return root


def _golden_min(f, lo, hi, xtol):
    """Vectorized golden-section minimization of |f| on [lo, hi]."""
    lo, hi = np.array(lo, float), np.array(hi, float)
    x1 = hi - _GOLD * (hi - lo)
    x2 = lo + _GOLD * (hi - lo)
    f1, f2 = np.abs(f(x1)), np.abs(f(x2))
    while np.max(hi - lo) > xtol:
        go_left = f1 < f2
        hi = np.where(go_left, x2, hi)
        lo = np.where(go_left, lo, x1)
        nx1 = np.where(go_left, hi - _GOLD * (hi - lo), x2)
        nx2 = np.where(go_left, x1, lo + _GOLD * (hi - lo))
        fnew = np.abs(f(np.where(go_left, nx1, nx2)))
        f1, f2 = np.where(go_left, fnew, f2), np.where(go_left, f1, fnew)
        x1, x2 = nx1, nx2
    return 0.5 * (lo + hi)


def find_roots(cf: CharFn, lambda_max: float, refine_tol: float = 1e-12,
               lambda_min: float = -4.0, step: float = 0.01,
               scan_tol: float | None = 1e-8, dip: float = 1e-8):
    """Real zeros of ``cf`` in (lambda_min, lambda_max] as (lambda, multiplicity).

    The scan runs in s with lambda = s*|s| so that the grid is uniform in rho.
    Sign changes are refined to ``refine_tol`` in rho. Local minima of |cf|
    with no sign change are searched for double zeros: a dip below
    ``dip`` times the local scale counts as a zero of multiplicity two, and a
    minimum of opposite sign reveals two close simple zeros.
    """
    if not lambda_max > 0:
        raise ValueError("lambda_max must be positive")
    if step > 0.01:
        raise ValueError("scan step must not exceed 0.01 in rho")
    s_lo = -np.sqrt(max(-lambda_min, 0.0)) if lambda_min < 0 else np.sqrt(lambda_min)
    s_hi = np.sqrt(lambda_max)
    n = int(np.ceil((s_hi - s_lo) / step)) + 1
    s = np.linspace(s_lo, s_hi, n)
    fs = np.asarray(cf(_lam(s), tol=scan_tol), dtype=float)

    def f(x):
        return np.asarray(cf(_lam(np.asarray(x, float))), dtype=float)

    found = []
    sgn = np.sign(fs)
    exact = np.nonzero(sgn == 0)[0]
    for i in exact:
        if 0 < i < n - 1:
            found.append((s[i], 1 if sgn[i - 1] * sgn[i + 1] < 0 else 2))
    cross = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    pairs_a, pairs_b = list(s[cross]), list(s[cross + 1])

    # dips: local minima of |f| without a sign change nearby
    af = np.abs(fs)
    inner = np.arange(1, n - 1)
    is_min = (af[inner] < af[inner - 1]) & (af[inner] <= af[inner + 1])
    same = (sgn[inner - 1] == sgn[inner]) & (sgn[inner] == sgn[inner + 1]) & (sgn[inner] != 0)
    cand = inner[is_min & same]
    if cand.size:
        # local scale: largest |f| within +-0.5 in rho
        w = max(1, int(round(0.5 / step)))
        scale = np.array([af[max(0, i - w): i + w + 1].max() for i in cand])
        # cheap prefilter: a double zero within one cell leaves |f| small at the grid
        keep = af[cand] < 1e-2 * scale
        cand, scale = cand[keep], scale[keep]
    if cand.size:
        xm = _golden_min(f, s[cand - 1], s[cand + 1], max(refine_tol, 1e-10))
        fm = f(xm)
        flipped = np.sign(fm) == -sgn[cand]
        for i, x, v, flip, sc in zip(cand, xm, fm, flipped, scale):
            if flip:
                pairs_a += [s[i - 1], x]
                pairs_b += [x, s[i + 1]]
            elif abs(v) < dip * sc:
                found.append((x, 2))
    if pairs_a:
        a, b = np.array(pairs_a), np.array(pairs_b)
        fa, fb = f(a), f(b)
        # the loose scan may disagree with the full tolerance right at a root;
        # rescan such cells at full tolerance and keep the sign changes found
        lost = fa * fb > 0
        if lost.any():
            ka, kb = [a[~lost]], [b[~lost]]
            for lo, hi in zip(a[lost] - step, b[lost] + step):
                xs = np.linspace(lo, hi, 9)
                fx = f(xs)
                idx = np.nonzero(np.sign(fx[:-1]) * np.sign(fx[1:]) < 0)[0]
                ka.append(xs[idx])
                kb.append(xs[idx + 1])
            a, b = np.concatenate(ka), np.concatenate(kb)
            fa, fb = f(a), f(b)
        roots = _illinois(f, a, b, fa, fb, refine_tol)
        found += [(x, 1) for x in roots]
    found.sort(key=lambda t: t[0])
    return [(float(_lam(x)), m) for x, m in found]


def scan_sign_changes(cf: CharFn, lambda_max: float, lambda_min: float = -4.0,
                      step: float = 0.01, tol: float | None = None) -> np.ndarray:
    """Grid cells (in rho) that contain a sign change; used as a brute-force check."""
    s_lo = -np.sqrt(-lambda_min) if lambda_min < 0 else np.sqrt(lambda_min)
    s = np.arange(s_lo, np.sqrt(lambda_max) + step, step)
    v = np.sign(cf(_lam(s), tol=tol))
    i = np.nonzero(v[:-1] * v[1:] < 0)[0]
    return np.column_stack([s[i], s[i + 1]])


# ---------------------------------------------------------------------------
# alpha-profile

@dataclass(frozen=True)
class AlphaProfile:
    """Fractional parts alpha_k of the zero-potential branches rho = n + alpha_k."""

    alphas: np.ndarray
    d: int
    z_roots: np.ndarray = field(repr=False, default=None)

    @property
    def z_alpha(self) -> int:
        return int(np.sum(np.abs(self.alphas) < 1e-9))

    @property
    def K_set(self) -> list[float]:
        """Simple alphas strictly inside (0, 1/2), increasing."""
        return [a for a in self.alphas
                if 1e-9 < a < 0.5 - 1e-9 and np.sum(np.abs(self.alphas - a) < 1e-9) == 1]

    @property
    def zero_order_rho(self) -> int:
        """Order of the zero of Delta(rho^2) at rho = 0."""
        return max(self.z_alpha + 1 - self.d, 0)

    @property
    def zero_multiplicity(self) -> int:
        """Multiplicity of the eigenvalue lambda = 0 (half the rho order)."""
        return self.zero_order_rho // 2

    @property
    def min_gap(self) -> float:
        """Smallest distance between distinct alphas on the circle R/Z."""
        u = np.unique(np.round(np.mod(self.alphas, 1.0), 9))
        if u.size < 2:
            return 1.0
        gaps = np.diff(np.append(u, u[0] + 1.0))
        return float(gaps.min())


def _polish_roots(q: np.ndarray) -> np.ndarray:
    """Roots of Q with clusters refined by Newton on the matching derivative."""
    raw = P.polyroots(q)
    order = np.argsort(raw.real)
    raw = raw[order]
    out = []
    i = 0
    while i < raw.size:
        j = i + 1
        while j < raw.size and abs(raw[j] - raw[i]) < 1e-4:
            j += 1
        k = j - i
        z = np.mean(raw[i:j])
        dq = P.polyder(q, k - 1) if k > 1 else q
        ddq = P.polyder(dq)
        for _ in range(50):
            step = P.polyval(z, dq) / P.polyval(z, ddq) if P.polyval(z, ddq) != 0 else 0
            z = z - step
            if abs(step) < 1e-16:
                break
        out += [z] * k
        i = j
    return np.array(out)


def alpha_profile(tp: TrigPolyForm) -> AlphaProfile:
    q = np.asarray(tp.q, float)
    z = _polish_roots(q) if q.size > 1 else np.zeros(0, complex)
    if z.size and (np.max(np.abs(z.imag)) > 1e-9 or np.max(np.abs(z.real)) > 1 + 1e-9):
        raise AlphaError("non-self-adjoint artifact: root of Q off [-1, 1]")
    zr = np.clip(z.real, -1.0, 1.0)
    alphas = np.arccos(zr) / np.pi
    alphas = np.where(np.abs(alphas - 1.0) < 1e-9, 0.0, alphas)
    if tp.has_sin:
        alphas = np.append(alphas, 0.0)
    return AlphaProfile(np.sort(alphas), tp.d, zr)


# ---------------------------------------------------------------------------
# numbering

@dataclass(frozen=True)
class Entry:
    n: int
    k: int          # index into AlphaProfile.K_set plus one; 0 outside K
    alpha: float
    lam: float
    rho: float      # signed: negative for the 1 - alpha half of a K branch
    kappa: float


@dataclass(frozen=True)
class NumberedSpectrum:
    entries: tuple[Entry, ...]
    problem_id: str = "L"
    profile: AlphaProfile | None = None

    def branch(self, k: int) -> list[Entry]:
        return sorted((e for e in self.entries if e.k == k), key=lambda e: e.lam)

    @property
    def branches(self) -> list[int]:
        return sorted({e.k for e in self.entries if e.k > 0})


def number_spectrum(roots: Sequence, ap: AlphaProfile, problem_id: str = "L",
                    threshold: float | None = None) -> NumberedSpectrum:
    """Attach each eigenvalue to a zero-potential target n + alpha.

    ``roots`` are (lambda, multiplicity) pairs sorted by lambda. The lowest
    ``ap.zero_multiplicity`` eigenvalues belong to the zero eigenvalue; the
    rest are matched in order to the positive targets. A mismatch larger than
    half the smallest alpha gap raises :class:`NumberingError`.
    """
    lams = []
    for lam, mult in roots:
        lams += [float(lam)] * int(mult)
    lams.sort()
    thr = 0.5 * ap.min_gap if threshold is None else threshold
    e0 = ap.zero_multiplicity
    entries = [Entry(0, 0, 0.0, lam, float(np.sign(lam) * np.sqrt(abs(lam))),
                     float(np.sign(lam) * np.sqrt(abs(lam))))
               for lam in lams[:e0]]
    rest = np.array(lams[e0:])
    if rest.size and rest.min() < 0:
        raise NumberingError("numbering unreliable: negative eigenvalue beyond the zero group")
    rho = np.sqrt(rest)
    n_hi = int(np.ceil(rho.max())) + 2 if rho.size else 1
    targets = sorted((n + a, n, a) for n in range(n_hi + 1) for a in ap.alphas
                     if not (n == 0 and a < 1e-9))
    kset = ap.K_set
    for i, (lam, r) in enumerate(zip(rest, rho)):
        t, n, a = targets[i]
        if abs(r - t) > thr:
            raise NumberingError(
                f"numbering unreliable: rho={r:.6g} is {abs(r - t):.3g} away from "
                f"target {t:.6g} (threshold {thr:.3g})")
        k, idx, signed, alpha = 0, n, r, a
        for j, ak in enumerate(kset, 1):
            if abs(a - ak) < 1e-9:
                k = j
            elif abs(a - (1.0 - ak)) < 1e-9:
                k, idx, signed, alpha = j, -(n + 1), -r, ak
        entries.append(Entry(idx, k, float(alpha), float(lam), float(signed),
                             float(signed - idx - alpha)))
    return NumberedSpectrum(tuple(entries), problem_id, ap)


# ---------------------------------------------------------------------------
# subspectra and assumptions

@dataclass(frozen=True)
class SubValue:
    problem_id: str
    n: int
    k: int       # branch number within the subspectrum, 1..l
    alpha: float
    lam: float


@dataclass
class Subspectrum:
    values: list[SubValue]
    excluded: list[SubValue]
    l: int
    r: int
    report: dict = field(default_factory=dict)

    @property
    def lams(self) -> np.ndarray:
        return np.array([v.lam for v in self.values])

    def by_problem(self, pid: str) -> list[SubValue]:
        return [v for v in self.values if v.problem_id == pid]


def select_subspectrum(spectra: Sequence[NumberedSpectrum], l: int, r: int,
                       n_max: int = 40) -> Subspectrum:
    """Take l K-branches (the main problem first), drop lambda_{n1}, n = 1..r-1."""
    chosen = []
    for ns in spectra:
        for k in ns.branches:
            if len(chosen) < l:
                chosen.append((ns, k))
    if len(chosen) < l:
        raise SubspectrumError(
            f"insufficient subspectrum: {len(chosen)} usable branches for {l} unknown edges; "
            "supply auxiliary problems with changed known-side boundary conditions")
    values, excluded = [], []
    for kk, (ns, k) in enumerate(chosen, 1):
        for e in ns.branch(k):
            if abs(e.n) > n_max:
                continue
            v = SubValue(ns.problem_id, e.n, kk, e.alpha, e.lam)
            if kk == 1 and 1 <= e.n <= r - 1:
                excluded.append(v)
            else:
                values.append(v)
    return Subspectrum(values, excluded, l, r)


@dataclass(frozen=True)
class Check:
    status: str        # "pass", "fail" or "unknown"
    detail: str = ""
    witness: float | None = None


def _local_scale(fn, lam):
    rho = np.sqrt(np.abs(lam))
    probe = np.concatenate([(rho + d) for d in (-0.5, -0.25, 0.25, 0.5)])
    probe = np.maximum(probe, 0.05)
    vals = np.abs(fn(probe ** 2)).reshape(4, -1)
    return vals.max(axis=0)


def _nonzero_at(fn, lam, rel=1e-8):
    val = np.abs(fn(lam))
    return val >= rel * _local_scale(fn, lam)


def _common_zero(f, g, lam_max, rel=1e-11):
    """First zero of g that lies within a Newton step |f/f'| of a zero of f.

    The step is measured relative to max(1, |lambda|); a small value alone
    is not enough, since f can be tiny near, but not at, a zero of g.
    """
    for lam, _ in find_roots(g, lam_max, refine_tol=1e-12):
        scale = max(1.0, abs(lam))
        h = 1e-6 * scale
        fm, f0, fp = (float(v) for v in f(np.array([lam - h, lam, lam + h])))
        slope = abs(fp - fm) / (2 * h)
        if f0 == 0.0 or (slope > 0 and abs(f0) / slope < rel * scale):
            return lam
    return None


def check_assumptions(sub: Subspectrum, cs: CharFnSplit | dict | None = None,
                      lam_max: float | None = None) -> dict:
    """Run the solvability checks A1..A5 on the selected data.

    A1: the selected eigenvalues are distinct and positive.
    A2: the Pi parts do not vanish at the selected eigenvalues.
    A3: for r > 1, the unknown-side functions do not vanish at lambda = 0.
    A4: the unknown-side K and Pi have no common zero.
    A5: Delta and the product of the branch Dirichlet functions at the
    split vertex have no common zero (implies A2 and A4).

    ``cs`` may be a single split decomposition or a mapping from problem id
    to decomposition (several known-side variants). Checks needing unknown
    side data report "unknown" when only the known side is available.
    """
    splits = cs if isinstance(cs, dict) else {None: cs}
    lams = sub.lams
    rep = {}
    s = np.sort(lams)
    dup = np.nonzero(np.diff(s) <= 1e-8 * np.maximum(1.0, np.abs(s[1:])))[0]
    if s.size and s[0] <= 0:
        rep["A1"] = Check("fail", "non-positive eigenvalue", float(s[0]))
    elif dup.size:
        rep["A1"] = Check("fail", "coincident eigenvalues", float(s[dup[0]]))
    else:
        rep["A1"] = Check("pass")
    if cs is None:
        for key in ("A2", "A3", "A4", "A5"):
            rep[key] = Check("unknown", "no characteristic functions supplied")
        sub.report = rep
        return rep

    def split_for(pid):
        return splits.get(pid, splits.get(None, next(iter(splits.values()))))

    a2 = Check("pass")
    for pid in sorted({v.problem_id for v in sub.values}):
        c = split_for(pid)
        lp = np.array([v.lam for v in sub.by_problem(pid)])
        fns = [("known_Pi", c.known_Pi)]
        if c.unknown_Pi is not None:
            fns.append(("unknown_Pi", c.unknown_Pi))
        for name, fn in fns:
            ok = _nonzero_at(fn, lp)
            if not ok.all():
                a2 = Check("fail", f"{name} vanishes at an eigenvalue of {pid}",
                           float(lp[~ok][0]))
                break
        if a2.status == "fail":
            break
    if a2.status == "pass" and any(split_for(p).unknown_Pi is None for p in splits):
        a2 = Check("unknown", "known part passes; unknown part not available")
    rep["A2"] = a2

    c = split_for(None if None in splits else next(iter(splits)))
    lam_max = lam_max or (float(lams.max()) if lams.size else 100.0)
    if c.unknown_K is None:
        rep["A3"] = Check("unknown", "unknown side not available")
        rep["A4"] = Check("unknown", "unknown side not available")
        rep["A5"] = Check("unknown", "unknown side not available")
    else:
        zero = np.array([0.0])
        k0, p0 = float(c.unknown_K(zero)[0]), float(c.unknown_Pi(zero)[0])
        if sub.r == 1:
            rep["A3"] = Check("pass", "not required for r = 1")
        elif abs(k0) > 1e-10 and abs(p0) > 1e-10:
            rep["A3"] = Check("pass")
        else:
            rep["A3"] = Check("fail", "unknown-side function vanishes at 0", 0.0)
        w = _common_zero(c.unknown_K, c.unknown_Pi, lam_max)
        rep["A4"] = Check("pass") if w is None else Check("fail", "common zero", w)
        pi_all = CharFn(lambda lam, tol=None: c.known_Pi(lam) * c.unknown_Pi(lam),
                        0, 0, 0.0, "Pi_all")
        w = _common_zero(c.delta, pi_all, lam_max)
        rep["A5"] = Check("pass") if w is None else Check("fail", "common zero", w)
    sub.report = rep
    return rep


# ---------------------------------------------------------------------------
# infinite products

@dataclass(frozen=True)
class ZeroProduct:
    """prod_n (1 - lambda / lambda_n) over |n| <= N, with the tail of (n + a)^2."""

    lam_n: np.ndarray
    a: float
    n_max: int

    def _tail_log(self, rho2):
        # sum_{|n|>N} log(1 - rho^2/(n+a)^2) by the power series in rho^2
        out = np.zeros_like(rho2, dtype=complex)
        n0 = self.n_max + 1
        for j in range(1, 60):
            z = zeta(2 * j, n0 + self.a) + zeta(2 * j, n0 - self.a)
            out = out - rho2 ** j * z / j
        return out

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        trunc = np.prod(1.0 - lam[..., None] / self.lam_n, axis=-1)
        out = trunc * np.exp(self._tail_log(lam))
        return np.real_if_close(out)

    def truncation_estimate(self, lam) -> np.ndarray:
        """Relative change when the tail correction is dropped."""
        lam = np.asarray(lam, dtype=complex)
        return np.abs(np.expm1(self._tail_log(lam)))

    @staticmethod
    def closed_form(lam, a):
        """The exact product for lambda_n = (n + a)^2."""
        rho = np.sqrt(np.asarray(lam, dtype=complex))
        return np.real_if_close((np.cos(2 * rho * np.pi) - np.cos(2 * a * np.pi))
                                / (1.0 - np.cos(2 * a * np.pi)))


def product_from_zeros(lam_n, a: float, n_max: int | None = None) -> ZeroProduct:
    """Product over lambda_n = (n + a + kappa_n)^2 listed for n = -N..N in order.

    The tail series converges for |rho| < N + 1 - a; keep evaluations well below.
    """
    lam_n = np.asarray(lam_n, dtype=float)
    if np.any(lam_n == 0):
        raise ValueError("zero element in the zero sequence")
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    n_max = (lam_n.size - 1) // 2 if n_max is None else n_max
    return ZeroProduct(lam_n, float(a), int(n_max))


# ---------------------------------------------------------------------------
# CSV

def write_spectrum_csv(path, spectra: Sequence[NumberedSpectrum]) -> None:
    rows = []
    for ns in spectra:
        for e in sorted(ns.entries, key=lambda e: (e.k, e.lam)):
            rows.append((ns.problem_id, e.n, e.k, f"{e.alpha:.17g}", f"{e.rho:.17g}",
                         f"{e.lam:.17g}", f"{e.kappa:.6e}"))
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(rows)


def read_spectrum_csv(path) -> dict[str, NumberedSpectrum]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ValueError(f"{path}: missing '{CSV_HEADER}' header")
    reader = csv.DictReader(lines[1:])
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"{path}: columns must be {','.join(CSV_COLUMNS)}")
    groups: dict[str, list[Entry]] = {}
    for lineno, row in enumerate(reader, 3):
        try:
            e = Entry(int(row["n"]), int(row["k"]), float(row["alpha_k"]),
                      float(row["lambda"]), float(row["rho"]), float(row["kappa"]))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: bad row") from exc
        groups.setdefault(row["problem_id"], []).append(e)
    return {pid: NumberedSpectrum(tuple(es), pid) for pid, es in groups.items()}
