"""Finite simple graphs: tori, small named graphs, and short simple cycles."""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class Graph:
    """Finite simple undirected graph with dense vertex and edge ids.

    ``edges[i]`` is the pair ``(u, v)`` with ``u < v`` carried by edge id ``i``;
    ``adjacency[x]`` lists ``(neighbor, edge id)`` pairs.  ``bipartition`` is the
    0/1 colour of every vertex when the graph is two-colourable, else ``None``.
    """

    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    adjacency: tuple[tuple[tuple[int, int], ...], ...]
    bipartition: tuple[int, ...] | None
    name: str = "graph"
    shape: tuple[int, ...] = ()
    periodic: bool = False
    _edge_index: dict = field(default=None, compare=False, hash=False, repr=False)

    def __post_init__(self):
        index = {}
        for i, (u, v) in enumerate(self.edges):
            index[(u, v)] = i
            index[(v, u)] = i
        object.__setattr__(self, "_edge_index", index)

    @property
    def vertices(self) -> range:
        return range(self.n_vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    @property
    def is_bipartite(self) -> bool:
        return self.bipartition is not None

    def degree(self, x: int) -> int:
        return len(self.adjacency[x])

    def neighbors(self, x: int) -> list[int]:
        return [y for y, _ in self.adjacency[x]]

    def edge_id(self, u: int, v: int) -> int:
        try:
            return self._edge_index[(u, v)]
        except KeyError:
            raise ValueError(f"({u}, {v}) is not an edge of {self.name}") from None

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._edge_index

    def coords(self, x: int) -> tuple[int, ...]:
        """Lattice coordinates of ``x`` for tori and boxes (first axis fastest)."""
        if not self.shape:
            raise ValueError(f"{self.name} has no lattice coordinates")
        out = []
        for side in self.shape:
            out.append(x % side)
            x //= side
        return tuple(out)

    def vertex_at(self, coords) -> int:
        if not self.shape:
            raise ValueError(f"{self.name} has no lattice coordinates")
        x, stride = 0, 1
        for c, side in zip(coords, self.shape):
            c = c % side if self.periodic else c
            if not 0 <= c < side:
                raise ValueError(f"coordinates {tuple(coords)} outside {self.name}")
            x += c * stride
            stride *= side
        return x

    def distance(self, x: int, y: int) -> int:
        """Graph distance by breadth-first search."""
        if x == y:
            return 0
        seen = {x: 0}
        queue = deque([x])
        while queue:
            u = queue.popleft()
            for w, _ in self.adjacency[u]:
                if w not in seen:
                    seen[w] = seen[u] + 1
                    if w == y:
                        return seen[w]
                    queue.append(w)
        raise ValueError(f"{y} is not reachable from {x}")

    def side(self, x: int) -> int:
        if self.bipartition is None:
            raise ValueError(f"{self.name} is not bipartite")
        return self.bipartition[x]


def _two_colouring(n: int, adjacency) -> tuple[int, ...] | None:
    colour = [-1] * n
    for s in range(n):
        if colour[s] >= 0:
            continue
        colour[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w, _ in adjacency[u]:
                if colour[w] < 0:
                    colour[w] = 1 - colour[u]
                    queue.append(w)
    # full edge scan; BFS alone does not certify odd cycles away
    for u in range(n):
        for w, _ in adjacency[u]:
            if colour[u] == colour[w]:
                return None
    return tuple(colour)


def from_edges(n_vertices: int, edges, name: str = "graph", shape=(), periodic=False) -> Graph:
    """Build a :class:`Graph`, rejecting self-loops and duplicate edges."""
    if n_vertices < 1:
        raise ValueError("a graph needs at least one vertex")
    normalized = []
    seen = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        if not (0 <= u < n_vertices and 0 <= v < n_vertices):
            raise ValueError(f"edge ({u}, {v}) has an endpoint outside 0..{n_vertices - 1}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ValueError(f"duplicate edge {key}")
        seen.add(key)
        normalized.append(key)
    adjacency = [[] for _ in range(n_vertices)]
    for i, (u, v) in enumerate(normalized):
        adjacency[u].append((v, i))
        adjacency[v].append((u, i))
    adjacency = tuple(tuple(a) for a in adjacency)
    return Graph(
        n_vertices=n_vertices,
        edges=tuple(normalized),
        adjacency=adjacency,
        bipartition=_two_colouring(n_vertices, adjacency),
        name=name,
        shape=tuple(shape),
        periodic=periodic,
    )


def build_torus(L: int, d: int) -> Graph:
    """Nearest-neighbour torus on ``L**d`` vertices.

    ``L = 2`` would make the wrap-around edge coincide with the direct one, so
    any ``L < 3`` is refused instead of silently merging edges.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if L < 3:
        raise ValueError(f"torus side length must be >= 3, got {L}")
    shape = (L,) * d
    n = L**d
    edges = []
    for x in range(n):
        c = []
        y = x
        for _ in range(d):
            c.append(y % L)
            y //= L
        stride = 1
        for axis in range(d):
            nxt = x + ((c[axis] + 1) % L - c[axis]) * stride
            edges.append((x, nxt))
            stride *= L
    return from_edges(n, edges, name=f"torus({L},{d})", shape=shape, periodic=True)


def build_box(L: int, d: int) -> Graph:
    if L < 1 or d < 1:
        raise ValueError(f"box needs L >= 1 and d >= 1, got L={L}, d={d}")
    shape = (L,) * d
    edges = []
    for coords in itertools.product(range(L), repeat=d):
        x = sum(c * L**i for i, c in enumerate(coords))
        for axis in range(d):
            if coords[axis] + 1 < L:
                edges.append((x, x + L**axis))
    if not edges:
        raise ValueError("box with a single vertex has no edges")
    return from_edges(L**d, edges, name=f"box({L},{d})", shape=shape, periodic=False)


def build_named(kind: str, n: int | None = None, L: int | None = None, d: int | None = None) -> Graph:
    """Small named graphs: ``single_edge``, ``path``, ``cycle``, ``box``, ``torus``."""
    if kind == "single_edge":
        return from_edges(2, [(0, 1)], name="single_edge")
    if kind == "path":
        if n is None or n < 2:
            raise ValueError(f"path(n) needs n >= 2 vertices, got {n}")
        return from_edges(n, [(i, i + 1) for i in range(n - 1)], name=f"path({n})")
    if kind == "cycle":
        if n is None or n < 3:
            raise ValueError(f"cycle(n) needs n >= 3, got {n}")
        return from_edges(n, [(i, (i + 1) % n) for i in range(n)], name=f"cycle({n})")
    if kind == "box":
        return build_box(L, d)
    if kind == "torus":
        return build_torus(L, d)
    raise ValueError(f"unknown graph kind {kind!r}")


@dataclass(frozen=True)
class Cycle:
    vertices: tuple[int, ...]
    edges: tuple[int, ...]

    def __len__(self):
        return len(self.vertices)


@dataclass(frozen=True)
class CycleList:
    cycles: tuple[Cycle, ...]
    max_len: int

    def __len__(self):
        return len(self.cycles)

    def __iter__(self):
        return iter(self.cycles)

    def __getitem__(self, i):
        return self.cycles[i]

    def spans_cycle_space(self, g: Graph) -> bool:
        """True when the cycles generate the whole GF(2) cycle space of ``g``."""
        return cycle_space_rank(self, g) == cycle_space_dimension(g)


def canonical_cycle(vertices) -> tuple[int, ...]:
    """Minimal rotation of the lexicographically smaller orientation."""
    vs = tuple(vertices)
    k = len(vs)
    rev = tuple(reversed(vs))
    return min(min(w[i:] + w[:i] for i in range(k)) for w in (vs, rev))


def enumerate_cycles(g: Graph, max_len: int) -> CycleList:
    """All simple cycles of length 3..``max_len``, one per rotation/reflection class."""
    if max_len < 3:
        raise ValueError(f"max_len must be >= 3, got {max_len}")
    found = []
    adj = [sorted(g.neighbors(x)) for x in g.vertices]
    for s in g.vertices:
        path = [s]
        on_path = {s}

        def extend(u):
            for w in adj[u]:
                if w == s and len(path) >= 3:
                    # each cycle is met in both orientations; keep one
                    if path[1] < path[-1]:
                        found.append(tuple(path))
                elif w > s and w not in on_path and len(path) < max_len:
                    path.append(w)
                    on_path.add(w)
                    extend(w)
                    path.pop()
                    on_path.discard(w)

        extend(s)
    cycles = []
    for vs in sorted(set(canonical_cycle(c) for c in found), key=lambda c: (len(c), c)):
        eids = tuple(g.edge_id(vs[i], vs[(i + 1) % len(vs)]) for i in range(len(vs)))
        cycles.append(Cycle(vs, eids))
    return CycleList(tuple(cycles), max_len)


def winding_cycles(g: Graph) -> CycleList:
    """Straight non-contractible cycles of a torus, one per line along each axis."""
    if not g.periodic:
        raise ValueError(f"{g.name} is not a torus")
    d = len(g.shape)
    out = []
    for axis in range(d):
        L = g.shape[axis]
        others = [range(s) for i, s in enumerate(g.shape) if i != axis]
        for rest in itertools.product(*others):
            verts = []
            for t in range(L):
                c = list(rest)
                c.insert(axis, t)
                verts.append(g.vertex_at(c))
            vs = canonical_cycle(verts)
            eids = tuple(g.edge_id(vs[i], vs[(i + 1) % L]) for i in range(L))
            out.append(Cycle(vs, eids))
    return CycleList(tuple(out), max(g.shape))


def merge_cycle_lists(*lists: CycleList) -> CycleList:
    seen = {}
    for cl in lists:
        for c in cl:
            seen.setdefault(c.vertices, c)
    cycles = sorted(seen.values(), key=lambda c: (len(c), c.vertices))
    return CycleList(tuple(cycles), max((cl.max_len for cl in lists), default=0))


def cycle_space_dimension(g: Graph) -> int:
    comps = 0
    seen = [False] * g.n_vertices
    for s in g.vertices:
        if seen[s]:
            continue
        comps += 1
        seen[s] = True
        stack = [s]
        while stack:
            u = stack.pop()
            for w, _ in g.adjacency[u]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
    return g.n_edges - g.n_vertices + comps


def cycle_space_rank(cycles: CycleList, g: Graph) -> int:
    basis = {}  # pivot bit -> vector
    for c in cycles:
        vec = 0
        for e in c.edges:
            vec ^= 1 << e
        while vec:
            pivot = vec.bit_length() - 1
            if pivot in basis:
                vec ^= basis[pivot]
            else:
                basis[pivot] = vec
                break
    return len(basis)


def write_edgelist(g: Graph, path) -> None:
    lines = [f"#vertices {g.n_vertices}"] + [f"{u} {v}" for u, v in g.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edgelist(path) -> Graph:
    n = None
    edges = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "vertices":
                n = int(parts[1])
            continue
        u, v = line.split()
        edges.append((int(u), int(v)))
    if n is None:
        raise ValueError("edge list is missing the '#vertices N' header")
    return from_edges(n, edges, name=Path(path).stem)
