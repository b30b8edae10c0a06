"""Problem files: a tree, its potentials, the split and the problems to solve.

The format is INI-like::

    [tree]
    vertices = 0 1 2 3 11
    edges = 11:1>11 12:11>0 2:2>0 3:3>0     # id:tail>head, tail is x = 0
    bc = 1:D 2:N 3:N
    gamma = 2:0.5                         # optional, default 0

    [potentials]
    11 = cos 0 0.2                        # sigma(x) = 0.2 cos x on [0, pi]
    12 = sin 0.1                          # sigma(x) = 0.1 sin x
    2 = side.txt                          # file relative to the problem file
    3 = zero

    [split]
    w = 0
    known = 2 3

    [problems]
    L =                                   # the base problem
    L1 = 2:D                              # auxiliary problem: boundary changes

    [run]
    nmax = 40
    tol = 1e-2
    shift = 0
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .potential import PI, EdgePotential, read_potential
from .tree import DIRICHLET, NEUMANN, Edge, SubtreeSplit, TreeError, TreeSpec, make_split, validate


class ProblemError(ValueError):
    """Malformed problem file; the message names the offending line."""


RUN_DEFAULTS = {
    "nmax": 40,          # largest |n| taken from each branch
    "n_t": 1024,         # samples of the recovered kernels in reports
    "tol": 1e-2,         # spectral-fit tolerance (relative eigenvalue mismatch)
    "shift": 0.0,        # spectrum shift applied before the moment system
    "n_fit": 25,         # zeros per spectrum used by the fits
    "n_coef": 16,        # cosine coefficients per unit edge
    "pass_tol": 5e-2,    # round trip: relative L2 error that counts as a pass
    "perturb": 0.0,      # round trip: amplitude of seeded random perturbations
}


@dataclass
class ProblemFile:
    path: Path | None
    tree: TreeSpec
    pots: dict                  # edge id -> EdgePotential (possibly partial)
    known: tuple
    problems: dict              # problem id -> boundary-condition changes
    run: dict = field(default_factory=dict)

    @property
    def split(self) -> SubtreeSplit:
        return make_split(self.tree, self.tree.split_vertex, self.known)

    @property
    def unknown(self) -> tuple:
        return tuple(e for e in self.tree.edge_ids if e not in self.known)

    def problem_tree(self, pid: str) -> TreeSpec:
        return self.tree.with_bc(self.problems[pid])


def _lines(text: str):
    """(section, key) -> line number, for error messages."""
    where, section = {}, None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]", line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = no
        elif section and "=" in line and not line.startswith(("#", ";")):
            where[(section, line.split("=", 1)[0].strip())] = no
    return where


class _Reader:
    def __init__(self, text: str, source: str):
        self.cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                            interpolation=None)
        self.cp.optionxform = str
        try:
            self.cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ProblemError(f"{source}: {exc}".replace("\n", " ")) from exc
        self.where = _lines(text)
        self.source = source

    def fail(self, section, key, msg):
        no = self.where.get((section, key), self.where.get((section, None)))
        at = f"{self.source}:{no}" if no else self.source
        raise ProblemError(f"{at}: {msg}")

    def get(self, section, key, default=None):
        if not self.cp.has_section(section):
            if default is None:
                raise ProblemError(f"{self.source}: missing section [{section}]")
            return default
        if not self.cp.has_option(section, key):
            if default is None:
                self.fail(section, None, f"missing key '{key}' in [{section}]")
            return default
        return self.cp.get(section, key)

    def ints(self, section, key):
        try:
            return [int(x) for x in self.get(section, key).split()]
        except ValueError:
            self.fail(section, key, f"'{key}' must be a list of integers")

    def pairs(self, section, key, conv, default=""):
        out = {}
        for tok in self.get(section, key, default).split():
            try:
                a, b = tok.split(":")
                out[int(a)] = conv(b)
            except ValueError:
                self.fail(section, key, f"bad entry {tok!r} (expected id:value)")
        return out


def _bc(tag: str) -> str:
    tag = tag.strip().upper()
    if tag not in (DIRICHLET, NEUMANN):
        raise ValueError(tag)
    return tag


def parse_potential(text: str, base: Path | None, n_grid: int = 257) -> EdgePotential:
    """'zero', 'cos a0 a1 ...', 'sin b1 b2 ...' or a potential file name."""
    parts = text.split()
    if not parts:
        raise ValueError("empty potential")
    kind = parts[0].lower()
    x = np.linspace(0.0, PI, n_grid)
    if kind == "zero" and len(parts) == 1:
        return EdgePotential.zero(n_grid)
    if kind in ("cos", "sin"):
        c = np.array([float(v) for v in parts[1:]])
        if kind == "cos":
            k = np.arange(c.size)
            return EdgePotential(np.cos(np.outer(x, k)) @ c)
        k = np.arange(1, c.size + 1)
        return EdgePotential(np.sin(np.outer(x, k)) @ c)
    path = Path(text.strip())
    if base is not None and not path.is_absolute():
        path = base / path
    return read_potential(path)


def load_problem(path, require_all: bool = False) -> ProblemFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemError(f"{path}: cannot read ({exc.strerror})") from exc
    return parse_problem(text, str(path), path.parent, require_all)


def parse_problem(text: str, source: str = "<problem>", base: Path | None = None,
                  require_all: bool = False) -> ProblemFile:
    rd = _Reader(text, source)
    verts = rd.ints("tree", "vertices")
    edges = []
    for tok in rd.get("tree", "edges").split():
        m = re.fullmatch(r"(-?\d+):(-?\d+)>(-?\d+)", tok)
        if not m:
            rd.fail("tree", "edges", f"bad edge {tok!r} (expected id:tail>head)")
        edges.append(Edge(int(m.group(1)), int(m.group(2)), int(m.group(3))))
    bc = rd.pairs("tree", "bc", _bc)
    gamma = rd.pairs("tree", "gamma", float)
    w_raw = rd.get("split", "w")
    try:
        w = int(w_raw)
    except ValueError:
        rd.fail("split", "w", "split vertex must be an integer")
    tree = TreeSpec(tuple(verts), tuple(edges), bc, gamma, w)
    problems_found = validate(tree)
    if problems_found:
        rd.fail("tree", None, "invalid tree: " + "; ".join(problems_found))
    known = tuple(rd.ints("split", "known"))
    try:
        make_split(tree, w, known)
    except TreeError as exc:
        rd.fail("split", "known", str(exc))

    pots = {}
    if rd.cp.has_section("potentials"):
        for key, val in rd.cp.items("potentials"):
            try:
                eid = int(key)
            except ValueError:
                rd.fail("potentials", key, f"potential key {key!r} is not an edge id")
            if eid not in tree.edge_ids:
                rd.fail("potentials", key, f"edge {eid} is not in the tree")
            try:
                pots[eid] = parse_potential(val, base)
            except (OSError, ValueError) as exc:
                rd.fail("potentials", key, f"cannot read potential: {exc}")
    if require_all:
        missing = [e for e in tree.edge_ids if e not in pots]
        if missing:
            rd.fail("potentials", None, f"missing potentials for edges {missing}")

    problems = {}
    if rd.cp.has_section("problems"):
        for key, val in rd.cp.items("problems"):
            pid = key
            ch = {}
            for tok in val.split():
                try:
                    v, tag = tok.split(":")
                    ch[int(v)] = _bc(tag)
                except ValueError:
                    rd.fail("problems", key, f"bad change {tok!r} (expected vertex:D or vertex:N)")
            for v in ch:
                if v not in tree.boundary:
                    rd.fail("problems", key, f"vertex {v} is not a boundary vertex")
            problems[pid] = ch
    problems.setdefault("L", {})
    if problems["L"]:
        rd.fail("problems", "L", "the base problem L cannot change boundary conditions")

    run = dict(RUN_DEFAULTS)
    if rd.cp.has_section("run"):
        for key, val in rd.cp.items("run"):
            if key not in RUN_DEFAULTS:
                rd.fail("run", key, f"unknown run parameter '{key}'")
            try:
                run[key] = type(RUN_DEFAULTS[key])(float(val)) if isinstance(
                    RUN_DEFAULTS[key], int) else float(val)
            except ValueError:
                rd.fail("run", key, f"'{key}' must be a number")
    return ProblemFile(Path(source) if base is not None else None, tree, pots, known,
                       problems, run)
