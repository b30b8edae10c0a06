"""Edge potentials sigma_j sampled on [0, pi].

A potential is piecewise linear between uniform nodes, plus optional jumps
(a jump of sigma is a Dirac mass in q = sigma').
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

PI = np.pi


@dataclass(frozen=True, eq=False)
class EdgePotential:
    """sigma on one unit edge: values at ``n_grid`` uniform nodes of [0, pi]."""

    values: np.ndarray
    jumps: tuple[tuple[float, float], ...] = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        if v.ndim != 1 or v.size < 2:
            raise ValueError("potential needs at least two grid values")
        if not np.all(np.isfinite(v)):
            raise ValueError("potential values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        jumps = tuple(sorted((float(x), float(d)) for x, d in self.jumps))
        for x, d in jumps:
            if not (0.0 < x < PI) or not np.isfinite(d):
                raise ValueError(f"jump at {x} must lie strictly inside (0, pi)")
        object.__setattr__(self, "jumps", jumps)

    @property
    def n_grid(self) -> int:
        return self.values.size

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, PI, self.n_grid)

    @property
    def is_zero(self) -> bool:
        return not self.jumps and not np.any(self.values)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.nodes, self.values)
        for xj, d in self.jumps:
            out = out + d * (x > xj)
        return out

    def shifted(self, c: float) -> "EdgePotential":
        """Potential for sigma(x) + c*x, i.e. q + c (spectrum shifts by c)."""
        return EdgePotential(self.values + c * self.nodes, self.jumps)

    def reversed(self) -> "EdgePotential":
        """Same operator with the edge parametrized from the other end."""
        return _reverse(self)

    @classmethod
    def zero(cls, n_grid: int = 2) -> "EdgePotential":
        return cls(np.zeros(n_grid))

    @classmethod
    def from_function(cls, f: Callable, n_grid: int = 257,
                      jumps: Sequence[tuple[float, float]] = ()) -> "EdgePotential":
        """Sample ``f`` on the grid; ``f`` must be the continuous part only."""
        x = np.linspace(0.0, PI, n_grid)
        return cls(np.asarray(f(x), dtype=float) * np.ones_like(x), tuple(jumps))

    @classmethod
    def cosine_series(cls, coeffs, n_grid: int = 257, offset: float = 0.0,
                      length: float = PI) -> "EdgePotential":
        """sigma(x) = sum_k a_k cos(k pi (x + offset) / length)."""
        x = np.linspace(0.0, PI, n_grid)
        return cls(cosine_values(coeffs, x + offset, length))


def _reverse(pot: EdgePotential) -> EdgePotential:
    # sigma~(x) = -sigma(pi - x) keeps q and the vertex conditions intact
    x = pot.nodes
    cont = np.interp(PI - x, x, pot.values)
    jumps = tuple((PI - xj, d) for xj, d in pot.jumps)
    # -H(pi - x - xj) = H(x - (pi - xj)) - 1: same jump, reflected, plus a constant
    base = -cont - sum(d for _, d in pot.jumps)
    return EdgePotential(base, jumps)


def cosine_values(coeffs, x, length: float) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    k = np.arange(coeffs.size)
    return np.cos(np.outer(np.asarray(x, float), k) * PI / length) @ coeffs


def split_function(f: Callable, n_edges: int, n_grid: int = 257) -> list[EdgePotential]:
    """Cut sigma on [0, n_edges*pi] into unit-edge potentials (in order)."""
    x = np.linspace(0.0, PI, n_grid)
    return [EdgePotential(np.asarray(f(x + j * PI), dtype=float) * np.ones_like(x))
            for j in range(n_edges)]


def read_potential(path) -> EdgePotential:
    """Read ``x value`` lines (uniform nodes over [0, pi]) and ``jump x delta`` lines."""
    xs, vs, jumps = [], [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "jump":
                jumps.append((float(parts[1]), float(parts[2])))
            else:
                xs.append(float(parts[0]))
                vs.append(float(parts[1]))
        except (IndexError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: cannot parse {raw!r}") from exc
    xs = np.asarray(xs)
    if xs.size < 2:
        raise ValueError(f"{path}: need at least two samples")
    grid = np.linspace(0.0, PI, xs.size)
    if not np.allclose(xs, grid, atol=1e-9):
        # resample onto a uniform grid
        vs = np.interp(grid, xs, vs)
    return EdgePotential(np.asarray(vs), tuple(jumps))


def write_potential(path, pot: EdgePotential, header: str = "") -> None:
    lines = []
    if header:
        lines += [f"# {h}" for h in header.splitlines()]
    lines += [f"{x:.17g} {v:.17g}" for x, v in zip(pot.nodes, pot.values)]
    lines += [f"jump {x:.17g} {d:.17g}" for x, d in pot.jumps]
    Path(path).write_text("\n".join(lines) + "\n")
