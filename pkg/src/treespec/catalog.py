"""Ready-made trees used by the demos, the tests and the CLI fixtures.

Edges of length 2*pi are stored as two unit edges: edge ``10*j + 1`` covers
[0, pi] (starting at the outer end) and ``10*j + 2`` covers [pi, 2*pi].
"""
from __future__ import annotations

from .tree import DIRICHLET as D, NEUMANN as N, Edge, SubtreeSplit, TreeSpec, make_split


def long_leg_star() -> TreeSpec:
    """Three-branch star: a 2*pi leg (outer end D) and two unit legs (outer ends N).

    The centre is vertex 0, the leg's midpoint is vertex 11.
    """
    edges = (Edge(11, 1, 11), Edge(12, 11, 0), Edge(2, 2, 0), Edge(3, 3, 0))
    return TreeSpec((0, 1, 2, 3, 11), edges, {1: D, 2: N, 3: N}, split_vertex=0)


def long_leg_star_split() -> SubtreeSplit:
    """Unit legs known, the long leg unknown."""
    return make_split(long_leg_star(), 0, (2, 3))


def double_fork() -> TreeSpec:
    """Two three-way vertices joined by edge 1.

    Vertex 0 (the split vertex) carries edge 1 and two 2*pi legs 4 (outer N)
    and 5 (outer D); vertex 1 carries edges 2 (outer N) and 3 (outer D).
    """
    edges = (Edge(1, 0, 1), Edge(2, 2, 1), Edge(3, 3, 1),
             Edge(41, 4, 14), Edge(42, 14, 0), Edge(51, 5, 15), Edge(52, 15, 0))
    return TreeSpec((0, 1, 2, 3, 4, 5, 14, 15), edges,
                    {2: N, 3: D, 4: N, 5: D}, split_vertex=0)


def double_fork_split() -> SubtreeSplit:
    """The 2*pi legs known, edges 1, 2, 3 unknown."""
    return make_split(double_fork(), 0, (41, 42, 51, 52))


def twin_leg_star() -> TreeSpec:
    """Star with two 3*pi legs (outer ends D) and one unit leg (outer end N).

    Leg 1 (edges 11, 12, 13) and leg 2 (edges 21, 22, 23) have the same
    length and boundary condition, so equal potentials on them make the
    split at the centre degenerate. Edge 3 is the unit leg.
    """
    edges = (Edge(11, 1, 11), Edge(12, 11, 12), Edge(13, 12, 0),
             Edge(21, 2, 21), Edge(22, 21, 22), Edge(23, 22, 0), Edge(3, 3, 0))
    return TreeSpec((0, 1, 2, 3, 11, 12, 21, 22), edges, {1: D, 2: D, 3: N}, split_vertex=0)


def twin_leg_star_split() -> SubtreeSplit:
    """Leg 2 and the unit leg known, leg 1 unknown."""
    return make_split(twin_leg_star(), 0, (21, 22, 23, 3))
