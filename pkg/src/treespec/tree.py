"""Metric trees with unit-pi edges, boundary tags and the known/unknown split."""
from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

DIRICHLET, NEUMANN = "D", "N"


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    id: int
    tail: int  # vertex at x = 0
    head: int  # vertex at x = pi

    def other(self, v: int) -> int:
        if v == self.tail:
            return self.head
        if v == self.head:
            return self.tail
        raise TreeError(f"vertex {v} is not an end of edge {self.id}")


@dataclass(frozen=True)
class TreeSpec:
    """A tree whose edges all have length pi.

    ``bc`` tags boundary vertices with ``"D"`` or ``"N"``; ``gamma`` holds the
    constants of the quasi-derivative at the x = pi end of each edge (default 0).
    """

    vertices: tuple[int, ...]
    edges: tuple[Edge, ...]
    bc: Mapping[int, str]
    gamma: Mapping[int, float] = field(default_factory=dict)
    split_vertex: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "bc", dict(self.bc))
        object.__setattr__(self, "gamma", {e.id: float(self.gamma.get(e.id, 0.0))
                                            for e in self.edges})

    # -- structure -------------------------------------------------------
    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def edge_ids(self) -> tuple[int, ...]:
        return tuple(e.id for e in self.edges)

    def edge(self, eid: int) -> Edge:
        for e in self.edges:
            if e.id == eid:
                return e
        raise KeyError(eid)

    def incident(self, v: int) -> list[Edge]:
        return [e for e in self.edges if v in (e.tail, e.head)]

    def degree(self, v: int) -> int:
        return len(self.incident(v))

    @property
    def boundary(self) -> list[int]:
        return [v for v in self.vertices if self.degree(v) == 1]

    @property
    def internal(self) -> list[int]:
        return [v for v in self.vertices if self.degree(v) >= 2]

    @property
    def d(self) -> int:
        """Number of Dirichlet conditions among the boundary conditions."""
        return sum(1 for v in self.boundary if self.bc.get(v) == DIRICHLET)

    @property
    def key(self) -> tuple[int, ...]:
        return tuple(sorted(self.edge_ids))

    def with_bc(self, changes: Mapping[int, str]) -> "TreeSpec":
        bc = dict(self.bc)
        bc.update(changes)
        return TreeSpec(self.vertices, self.edges, bc, self.gamma, self.split_vertex)

    def subtree(self, edge_ids: Iterable[int], extra_bc: Mapping[int, str] = ()) -> "TreeSpec":
        """Restriction to ``edge_ids``; new boundary vertices get ``extra_bc``.

        A vertex that was internal and becomes a degree-one vertex without an
        explicit tag gets the Kirchhoff condition for one edge, i.e. Neumann.
        """
        ids = set(edge_ids)
        edges = tuple(e for e in self.edges if e.id in ids)
        verts = tuple(v for v in self.vertices if any(v in (e.tail, e.head) for e in edges))
        extra = dict(extra_bc)
        bc = {}
        for v in verts:
            deg = sum(1 for e in edges if v in (e.tail, e.head))
            if v in extra:
                bc[v] = extra[v]
            elif deg == 1:
                bc[v] = self.bc.get(v, NEUMANN)
        return TreeSpec(verts, edges, bc, {e.id: self.gamma[e.id] for e in edges})


def validate(tree: TreeSpec) -> list[str]:
    """All invariant violations; empty when the tree is valid."""
    out = []
    verts = set(tree.vertices)
    if len(verts) != len(tree.vertices):
        out.append("duplicate vertex ids")
    ids = [e.id for e in tree.edges]
    if len(set(ids)) != len(ids):
        out.append("duplicate edge ids")
    for e in tree.edges:
        if e.tail not in verts or e.head not in verts:
            out.append(f"edge {e.id} references an unknown vertex")
        if e.tail == e.head:
            out.append(f"edge {e.id} is a loop")
    if not tree.edges:
        out.append("tree has no edges")
        return out
    if len(tree.edges) != len(tree.vertices) - 1:
        out.append("not acyclic" if len(tree.edges) >= len(tree.vertices) else "not connected")
    elif not _connected(tree):
        out.append("not connected")
    for v in tree.vertices:
        deg = tree.degree(v)
        if deg == 0:
            out.append(f"vertex {v} is isolated")
        elif deg == 1:
            tag = tree.bc.get(v)
            if tag not in (DIRICHLET, NEUMANN):
                out.append(f"boundary vertex {v} has no boundary condition")
        elif v in tree.bc:
            out.append(f"internal vertex {v} carries a boundary condition")
    w = tree.split_vertex
    if w is not None and (w not in verts or tree.degree(w) < 2):
        out.append(f"split vertex {w} is not internal")
    return out


def _connected(tree: TreeSpec) -> bool:
    adj = defaultdict(list)
    for e in tree.edges:
        adj[e.tail].append(e.head)
        adj[e.head].append(e.tail)
    start = tree.vertices[0]
    seen = {start}
    todo = deque([start])
    while todo:
        v = todo.popleft()
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                todo.append(u)
    return len(seen) == len(tree.vertices)


def check(tree: TreeSpec) -> TreeSpec:
    problems = validate(tree)
    if problems:
        raise TreeError("; ".join(problems))
    return tree


def branch_edges(tree: TreeSpec, v: int, first: Edge) -> list[int]:
    """Edges of the component reached from ``v`` through ``first``."""
    out = [first.id]
    todo = [(first.other(v), first.id)]
    while todo:
        u, came = todo.pop()
        for e in tree.incident(u):
            if e.id != came:
                out.append(e.id)
                todo.append((e.other(u), e.id))
    return out


def split_at(tree: TreeSpec, v: int, cond: str = DIRICHLET) -> list[TreeSpec]:
    """Split at internal vertex ``v``: one subtree per incident edge, ``v`` tagged ``cond``."""
    if v not in tree.vertices or tree.degree(v) < 2:
        raise TreeError(f"cannot split at {v}: not an internal vertex")
    return [tree.subtree(branch_edges(tree, v, e), {v: cond}) for e in tree.incident(v)]


@dataclass(frozen=True)
class SubtreeSplit:
    tree: TreeSpec
    w: int
    known: TreeSpec
    unknown: TreeSpec
    children: tuple[TreeSpec, ...]  # unknown side split at w, Dirichlet at w

    @property
    def l(self) -> int:
        return self.unknown.m

    @property
    def p(self) -> int:
        return len(self.children)

    @property
    def l_j(self) -> list[int]:
        return [c.m for c in self.children]

    @property
    def r_j(self) -> list[int]:
        return [c.d for c in self.children]

    @property
    def r(self) -> int:
        """Dirichlet conditions on the boundary of the unknown side, w excluded."""
        return sum(1 for v in self.unknown_boundary if self.unknown.bc[v] == DIRICHLET)

    @property
    def unknown_boundary(self) -> list[int]:
        return [v for v in self.unknown.boundary if v != self.w]

    @property
    def b(self) -> int:
        return len(self.unknown_boundary)

    @property
    def known_edges(self) -> tuple[int, ...]:
        return self.known.key

    @property
    def unknown_edges(self) -> tuple[int, ...]:
        return self.unknown.key

    def branches(self, side: str) -> list[Edge]:
        """Edges at w on the given side ('known' or 'unknown')."""
        ids = set(self.known_edges if side == "known" else self.unknown_edges)
        return [e for e in self.tree.incident(self.w) if e.id in ids]


def make_split(tree: TreeSpec, w: int, known_edges: Iterable[int]) -> SubtreeSplit:
    check(tree)
    if w not in tree.vertices or tree.degree(w) < 2:
        raise TreeError(f"split vertex {w} is not internal")
    known_ids = set(known_edges)
    all_ids = set(tree.edge_ids)
    if not known_ids <= all_ids:
        raise TreeError(f"unknown edge ids {sorted(known_ids - all_ids)}")
    unknown_ids = all_ids - known_ids
    if not known_ids or not unknown_ids:
        raise TreeError("both sides of the split need at least one edge")
    # each side must be a union of whole branches at w
    for e in tree.incident(w):
        comp = set(branch_edges(tree, w, e))
        if not (comp <= known_ids or comp <= unknown_ids):
            raise TreeError(f"branch through edge {e.id} straddles the split")
    known = tree.subtree(known_ids)
    unknown = tree.subtree(unknown_ids)
    for side, t in (("known", known), ("unknown", unknown)):
        if w not in t.vertices or not _connected(t):
            raise TreeError(f"{side} side is not connected through {w}")
    children = tuple(unknown.subtree(branch_edges(unknown, w, e), {w: DIRICHLET})
                     for e in unknown.incident(w))
    sp = SubtreeSplit(tree, w, known, unknown, children)
    assert sp.l == sum(sp.l_j) and sp.r + sp.p == sum(sp.r_j)
    return sp


def chain(n_edges: int, bc0: str, bc1: str, start_vertex: int = 0, start_edge: int = 1) -> TreeSpec:
    """Path of unit edges oriented from vertex ``start_vertex`` onwards."""
    verts = tuple(range(start_vertex, start_vertex + n_edges + 1))
    edges = tuple(Edge(start_edge + i, verts[i], verts[i + 1]) for i in range(n_edges))
    return TreeSpec(verts, edges, {verts[0]: bc0, verts[-1]: bc1})


def star(bcs: Iterable[str], outward: bool = False) -> TreeSpec:
    """Star with centre 0; edge j joins outer vertex j to the centre.

    By default the outer end is x = 0 (as in the worked examples).
    """
    bcs = list(bcs)
    edges = tuple(Edge(j, 0, j) if outward else Edge(j, j, 0) for j in range(1, len(bcs) + 1))
    return TreeSpec(tuple(range(len(bcs) + 1)), edges,
                    {j: b for j, b in enumerate(bcs, 1)})
