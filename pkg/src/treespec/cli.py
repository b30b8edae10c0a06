"""Command line front end: ``treespec forward|alphas|partial-inverse|roundtrip``.

Every failure prints one line ``error CODE: message`` on stderr, followed by
a short human-readable report, and exits with the code's status.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_CODES = {
    "PARSE": 2,
    "TREE": 3,
    "NUMBERING": 4,
    "SUBSPECTRUM": 5,
    "BASIS": 6,
    "INVERSE": 7,
    "SOLVER": 8,
    "ROUNDTRIP": 9,
    "IO": 10,
}


class CliFailure(Exception):
    def __init__(self, code: str, msg: str, report: list[str] | None = None):
        super().__init__(msg)
        self.code = code
        self.report = report or []


def _limit_threads() -> None:
    n = os.environ.get("TREESPEC_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = n


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _checks(rep) -> dict:
    return {k: {"status": c.status, "detail": c.detail, "witness": c.witness}
            for k, c in sorted((rep or {}).items())}


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliFailure("IO", f"cannot create {out}: {exc.strerror}")
    return out


def _load(args, require_all: bool):
    from .problem import load_problem

    pf = load_problem(args.problem, require_all=require_all)
    for key in ("nmax", "tol", "shift"):
        val = getattr(args, key, None)
        if val is not None:
            pf.run[key] = val
    return pf


def _forward_spectra(pf, pots, lam_max):
    from .charfn import charfn_tree, charfn_zero_poly
    from .spectrum import alpha_profile, find_roots, number_spectrum

    out = {}
    for pid in pf.problems:
        t = pf.problem_tree(pid)
        ap = alpha_profile(charfn_zero_poly(t))
        roots = find_roots(charfn_tree(t, pots), lam_max)
        out[pid] = (number_spectrum(roots, ap, pid), ap, roots)
    return out


def _alpha_lines(pid, ap) -> list[str]:
    lines = [f"problem {pid}: d = {ap.d}, zero eigenvalue multiplicity {ap.zero_multiplicity}"]
    kset = ap.K_set
    for a in ap.alphas:
        mark = ""
        for j, ak in enumerate(kset, 1):
            if abs(a - ak) < 1e-9:
                mark = f"  branch {j}"
        lines.append(f"  alpha = {a:.10f}{mark}")
    return lines


def cmd_forward(args) -> int:
    from .spectrum import write_spectrum_csv

    pf = _load(args, require_all=True)
    lam_max = (pf.run["nmax"] + 1.5) ** 2
    res = _forward_spectra(pf, pf.pots, lam_max)
    for pid, (ns, ap, roots) in res.items():
        print("\n".join(_alpha_lines(pid, ap)))
        near = sum(int(m) for lam, m in roots if abs(lam) < 1e-6)
        expected = ap.zero_multiplicity
        status = "ok" if near == expected or expected == 0 else "differs"
        print(f"  eigenvalues with |lambda| < 1e-6: {near} "
              f"(zero-potential multiplicity {expected}, {status})")
        print(f"  {len(ns.entries)} eigenvalues up to lambda = {lam_max:g}")
    out = _out_dir(args)
    if out is not None:
        write_spectrum_csv(out / "spectrum.csv", [r[0] for r in res.values()])
        print(f"wrote {out / 'spectrum.csv'}")
    return 0


def cmd_alphas(args) -> int:
    from .charfn import charfn_zero_poly
    from .spectrum import alpha_profile

    pf = _load(args, require_all=False)
    rows = []
    for pid in pf.problems:
        ap = alpha_profile(charfn_zero_poly(pf.problem_tree(pid)))
        print("\n".join(_alpha_lines(pid, ap)))
        kset = ap.K_set
        for a in ap.alphas:
            k = next((j for j, ak in enumerate(kset, 1) if abs(a - ak) < 1e-9), 0)
            rows.append(f"{pid},{a:.15g},{k}")
    out = _out_dir(args)
    if out is not None:
        (out / "alphas.csv").write_text(
            "# treespec-csv v1\nproblem_id,alpha,k\n" + "\n".join(rows) + "\n")
        print(f"wrote {out / 'alphas.csv'}")
    return 0


def _variants(pf) -> dict:
    return {pid: ch for pid, ch in pf.problems.items() if pid != "L"}


def _solve(pf, spectra):
    from .interval import solve_partial_inverse

    run = pf.run
    return solve_partial_inverse(pf.tree, pf.known, {e: pf.pots[e] for e in pf.known}, spectra,
                                 _variants(pf), pf.tree.split_vertex, n_max=int(run["nmax"]),
                                 n_fit=int(run["n_fit"]), shift=run["shift"], tol=run["tol"],
                                 n_coef=int(run["n_coef"]))


def _stage_report(stages) -> list:
    return [dict(s) for s in stages]


def _write_solution(out: Path, pf, res) -> None:
    from .potential import write_potential

    for e, pot in sorted(res.pots.items()):
        write_potential(out / f"edge_{e}.txt", pot, f"recovered potential on edge {e}")
    tp = res.kernels
    if tp is not None:
        tp.n_t = int(pf.run["n_t"])
        t = tp.grid
        K, N = tp.K(t), tp.N(t)
        lines = ["# treespec-csv v1", "t,K,N"]
        lines += [f"{a:.12g},{b:.12g},{c:.12g}" for a, b, c in zip(t, K, N)]
        (out / "kernels.csv").write_text("\n".join(lines) + "\n")


def cmd_partial_inverse(args) -> int:
    from .spectrum import read_spectrum_csv

    pf = _load(args, require_all=False)
    missing = [e for e in pf.known if e not in pf.pots]
    if missing:
        raise CliFailure("PARSE", f"{args.problem}: known edges {missing} have no potential")
    try:
        spectra = read_spectrum_csv(args.spectra)
    except OSError as exc:
        raise CliFailure("IO", f"{args.spectra}: cannot read ({exc.strerror})")
    except ValueError as exc:
        raise CliFailure("IO", str(exc))
    absent = [p for p in pf.problems if p not in spectra]
    if absent:
        raise CliFailure("SUBSPECTRUM", f"{args.spectra}: no eigenvalues for problems {absent}")
    res = _solve(pf, spectra)
    report = {"command": "partial-inverse", "problem": str(args.problem),
              "split": {"w": pf.tree.split_vertex, "known": list(pf.known),
                        "unknown": list(pf.unknown)},
              "run": pf.run, "assumptions": _checks(res.assumptions),
              "stages": _stage_report(res.stages)}
    for s in res.stages:
        print("stage " + ", ".join(f"{k}={v}" for k, v in s.items() if k != "history"))
    out = _out_dir(args)
    if out is not None:
        _write_solution(out, pf, res)
        _write_json(out / "report.json", report)
        print(f"wrote {len(res.pots)} potentials and report.json to {out}")
    return 0


def edge_error(true, got, x) -> tuple[float, str]:
    """Relative discrete L2 error, or the absolute one when ``true`` vanishes."""
    import numpy as np

    a, b = true(x), got(x)
    norm = float(np.linalg.norm(a) / np.sqrt(x.size))
    diff = float(np.linalg.norm(a - b) / np.sqrt(x.size))
    if norm < 1e-8:
        return diff, "absolute"
    return diff / norm, "relative"


def _perturbed(pf, seed: int):
    import numpy as np

    from .potential import PI, EdgePotential

    amp = pf.run["perturb"]
    if not amp:
        return dict(pf.pots)
    rng = np.random.default_rng(seed)
    pots = dict(pf.pots)
    for e in pf.unknown:
        base = pots[e]
        c = amp * rng.standard_normal(4) / np.arange(1, 5)
        x = np.linspace(0.0, PI, base.n_grid)
        extra = np.cos(np.outer(x, np.arange(4))) @ c
        pots[e] = EdgePotential(base.values + extra, base.jumps)
    return pots


def cmd_roundtrip(args) -> int:
    import numpy as np

    from .potential import PI
    from .spectrum import write_spectrum_csv

    pf = _load(args, require_all=True)
    truth = _perturbed(pf, args.seed)
    lam_max = (pf.run["nmax"] + 1.5) ** 2
    fwd = _forward_spectra(pf, truth, lam_max)
    spectra = {pid: r[0] for pid, r in fwd.items()}
    blind = type(pf)(pf.path, pf.tree, {e: truth[e] for e in pf.known}, pf.known,
                     pf.problems, pf.run)
    res = _solve(blind, spectra)
    x = np.linspace(0.0, PI, 257)
    errors, passed = {}, True
    for e in pf.unknown:
        err, kind = edge_error(truth[e], res.pots[e], x)
        ok = err < pf.run["pass_tol"]
        passed &= ok
        errors[e] = {"error": err, "kind": kind, "pass": ok}
        print(f"edge {e}: {kind} L2 error {err:.3e}  {'pass' if ok else 'FAIL'}")
    print(f"roundtrip {'pass' if passed else 'FAIL'} at tolerance {pf.run['pass_tol']:g}")
    report = {"command": "roundtrip", "problem": str(args.problem), "seed": args.seed,
              "run": pf.run, "errors": errors, "pass": passed,
              "assumptions": _checks(res.assumptions), "stages": _stage_report(res.stages)}
    out = _out_dir(args)
    if out is not None:
        write_spectrum_csv(out / "spectrum.csv", list(spectra.values()))
        _write_solution(out, pf, res)
        _write_json(out / "report.json", report)
    if not passed:
        worst = max(errors.items(), key=lambda kv: kv[1]["error"])
        raise CliFailure("ROUNDTRIP", f"edge {worst[0]} error {worst[1]['error']:.3e} exceeds "
                                      f"{pf.run['pass_tol']:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="treespec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--problem", required=True, help="problem file (INI format)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--nmax", type=int, help="largest |n| per branch")
        sp.add_argument("--tol", type=float, help="spectral-fit tolerance")
        sp.add_argument("--shift", type=float, help="spectrum shift constant")
        sp.add_argument("--seed", type=int, default=0, help="seed for round-trip perturbations")

    common(sub.add_parser("forward", help="eigenvalues of every declared problem"))
    common(sub.add_parser("alphas", help="zero-potential alpha table"))
    sp = sub.add_parser("partial-inverse", help="recover the unknown potentials")
    common(sp)
    sp.add_argument("--spectra", required=True, help="numbered spectrum CSV")
    common(sub.add_parser("roundtrip", help="forward, blind, recover and compare"))
    return p


COMMANDS = {"forward": cmd_forward, "alphas": cmd_alphas,
            "partial-inverse": cmd_partial_inverse, "roundtrip": cmd_roundtrip}


def _classify(exc: BaseException) -> CliFailure:
    from .cauchy import SolverError
    from .charfn import ParityError
    from .interval import FitError, InverseError
    from .moments import BasisError, UnsupportedPath
    from .problem import ProblemError
    from .spectrum import AlphaError, NumberingError, SubspectrumError
    from .tree import TreeError

    if isinstance(exc, CliFailure):
        return exc
    table = [(ProblemError, "PARSE"), (TreeError, "TREE"), (NumberingError, "NUMBERING"),
             (AlphaError, "NUMBERING"), (SubspectrumError, "SUBSPECTRUM"),
             (BasisError, "BASIS"), (UnsupportedPath, "BASIS"), (InverseError, "INVERSE"),
             (SolverError, "SOLVER"), (ParityError, "SOLVER"), (OSError, "IO")]
    code = next((c for t, c in table if isinstance(exc, t)), None)
    if code is None:
        raise exc
    report = []
    if isinstance(exc, InverseError):
        report.append(f"failed stage: {exc.stage or 'unknown'}")
        for k, c in _checks(exc.report).items():
            report.append(f"  {k}: {c['status']} {c['detail']}".rstrip())
        if isinstance(exc, FitError) and exc.best is not None:
            report.append(f"best misfit reached: {exc.best.misfit:.3e}")
    if code == "NUMBERING":
        report.append("the potentials may be too large for the asymptotic numbering; "
                      "try smaller potentials or a larger scan range")
    return CliFailure(code, str(exc).replace("\n", " "), report)


def main(argv=None) -> int:
    _limit_threads()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # classified below; unknown errors propagate
        fail = _classify(exc)
        print(f"error {fail.code}: {fail}", file=sys.stderr)
        for line in fail.report:
            print(line, file=sys.stderr)
        return EXIT_CODES[fail.code]


if __name__ == "__main__":
    sys.exit(main())
