"""The random path model: links, pairings, cycle extraction, exact sums.

A configuration ``w = (m, pi)`` carries ``m[e]`` labelled links on each
edge and, at each vertex, a perfect matching of the link endpoints there.
An endpoint is written ``(edge id, label)`` with labels ``0..m[e]-1``; which
vertex it sits at is implied by the pairing it belongs to.

    mu(w) = N^{#cycles} prod_e beta^{m_e}/m_e! prod_x U(n_x),  n_x = (links at x)/2.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache

from .graphs import Graph
from .loops import LoopClass, canonicalize
from .weights import WeightFunction


@dataclass(frozen=True)
class RpmConfig:
    m: tuple[int, ...]
    pairings: tuple[tuple[tuple[tuple[int, int], tuple[int, int]], ...], ...]

    @staticmethod
    def empty(g: Graph) -> "RpmConfig":
        return RpmConfig(tuple([0] * g.n_edges), tuple(() for _ in g.vertices))

    @staticmethod
    def build(g: Graph, m, pairings) -> "RpmConfig":
        """Normalize and validate; ``pairings[x]`` is an iterable of endpoint pairs."""
        m = tuple(int(v) for v in m)
        if len(m) != g.n_edges or min(m, default=0) < 0:
            raise ValueError("m must hold one nonnegative count per edge")
        norm = []
        for x in g.vertices:
            pairs = [tuple(sorted((tuple(a), tuple(b)))) for a, b in pairings[x]]
            norm.append(tuple(sorted(pairs)))
        w = RpmConfig(m, tuple(norm))
        w.validate(g)
        return w

    def endpoints(self, g: Graph, x: int) -> list[tuple[int, int]]:
        return [(e, l) for _, e in g.adjacency[x] for l in range(self.m[e])]

    def validate(self, g: Graph) -> None:
        for x in g.vertices:
            want = self.endpoints(g, x)
            got = [p for pair in self.pairings[x] for p in pair]
            if len(want) % 2:
                raise ValueError(f"odd number of link endpoints at vertex {x}")
            if sorted(got) != sorted(want):
                raise ValueError(f"pairing at vertex {x} leaves unpaired or foreign link endpoints")

    def n(self, g: Graph) -> list[int]:
        return [sum(self.m[e] for _, e in g.adjacency[x]) // 2 for x in g.vertices]

    def partner_maps(self):
        out = []
        for pairs in self.pairings:
            d = {}
            for a, b in pairs:
                d[a] = b
                d[b] = a
            out.append(d)
        return out

    def to_json(self) -> str:
        return json.dumps({"m": list(self.m), "pairings": [[[list(a), list(b)] for a, b in p] for p in self.pairings]})

    @staticmethod
    def from_json(g: Graph, text: str) -> "RpmConfig":
        d = json.loads(text)
        return RpmConfig.build(g, d["m"], [[(tuple(a), tuple(b)) for a, b in p] for p in d["pairings"]])


@dataclass(frozen=True)
class CycleRecord:
    steps: tuple[tuple[int, tuple[int, int]], ...]  # (vertex left, link used)
    loop: LoopClass

    def __len__(self):
        return len(self.steps)


def extract_cycles(g: Graph, w: RpmConfig) -> list[CycleRecord]:
    """Cycle decomposition, sorted by (class, links) so it does not depend on traversal order."""
    partner = w.partner_maps()
    seen = set()
    out = []
    for e, (u, v) in enumerate(g.edges):
        for l in range(w.m[e]):
            if (e, l) in seen:
                continue
            steps = []
            verts = []
            link, at = (e, l), u
            while True:
                seen.add(link)
                a, b = g.edges[link[0]]
                nxt_vertex = b if at == a else a
                steps.append((at, link))
                verts.append(at)
                p = partner[nxt_vertex][link]
                at = nxt_vertex
                link = p
                if link == (e, l) and at == u:
                    break
                if link == (e, l):
                    raise RuntimeError("cycle traversal returned to its start in the wrong direction")
            out.append(CycleRecord(tuple(steps), canonicalize(verts + [verts[0]])))
    out.sort(key=lambda c: (c.loop.alpha, c.loop.word, sorted(s[1] for s in c.steps)))
    return out


def rpm_weight(g: Graph, w: RpmConfig, U: WeightFunction, N, beta) -> float:
    w.validate(g)
    cycles = len(extract_cycles(g, w))
    val = N**cycles
    for me in w.m:
        val *= beta**me / math.factorial(me)
    for n in w.n(g):
        val *= U.value(n)
    return val


def perfect_matchings(items):
    items = list(items)
    if not items:
        yield ()
        return
    a = items[0]
    for i in range(1, len(items)):
        rest = items[1:i] + items[i + 1 :]
        for sub in perfect_matchings(rest):
            yield ((a, items[i]),) + sub


def link_vectors(g: Graph, m_cap: int, total_cap: int | None = None):
    """All m with 0 <= m_e <= m_cap, even link count at every vertex, sum <= total_cap."""
    out = []
    for m in itertools.product(range(m_cap + 1), repeat=g.n_edges):
        if total_cap is not None and sum(m) > total_cap:
            continue
        if all(sum(m[e] for _, e in g.adjacency[x]) % 2 == 0 for x in g.vertices):
            out.append(m)
    return out


def enumerate_configs(g: Graph, m_cap: int, total_cap: int | None = None, limit: int = 200_000):
    """Every labelled configuration within the caps (brute force, tiny graphs only)."""
    out = []
    for m in link_vectors(g, m_cap, total_cap):
        per_vertex = []
        for x in g.vertices:
            ends = [(e, l) for _, e in g.adjacency[x] for l in range(m[e])]
            per_vertex.append(list(perfect_matchings(ends)))
        for choice in itertools.product(*per_vertex):
            out.append(RpmConfig.build(g, m, choice))
            if len(out) > limit:
                raise ValueError(f"more than {limit} configurations; shrink the caps")
    return out


# -- exact sums by a strand transfer over vertices ---------------------------


def _canon_strand(seq):
    r = tuple(reversed(seq))
    return min(seq, r)


def _pair_counts(g: Graph, m: tuple[int, ...]) -> dict:
    """Map closed-class multiset -> number of labelled pairings producing it.

    Strands are partially joined paths with both ends at unprocessed vertices.
    Vertices are processed in order; at each one every strand end sitting there
    is paired, merging strands or closing them into cycles.
    """
    strands = Counter()
    for e, (u, v) in enumerate(g.edges):
        if m[e]:
            strands[_canon_strand((u, v))] += m[e]
    states = {(tuple(sorted(strands.items())), ()): 1}
    for x in g.vertices:
        states = _process_vertex(x, states)
    out = defaultdict(int)
    for (st, closed), c in states.items():
        assert not st
        out[closed] += c
    return dict(out)


def _process_vertex(x, states):
    done = defaultdict(int)
    work = dict(states)
    while work:
        nxt = defaultdict(int)
        for (st, closed), cnt in work.items():
            strands = Counter(dict(st))
            ends = []  # (strand, end index) at x, one entry per strand type
            for s in sorted(strands):
                if s[0] == x:
                    ends.append((s, 0))
                if s[-1] == x and len(s) > 1:
                    ends.append((s, 1))
            if not ends:
                done[(st, closed)] += cnt
                continue
            s, i = ends[0]
            a = s if i == 0 else tuple(reversed(s))  # a starts at x
            strands[s] -= 1
            if strands[s] == 0:
                del strands[s]
            # other end of the same strand
            if len(a) > 1 and a[-1] == x:
                cl = Counter(dict(closed))
                cl[canonicalize(a).word] += 1
                key = (tuple(sorted(strands.items())), tuple(sorted(cl.items())))
                nxt[key] += cnt
            for t, mult in list(strands.items()):
                for j in (0, 1):
                    if t[j if j == 0 else -1] != x or (j == 1 and len(t) == 1):
                        continue
                    b = t if j == 0 else tuple(reversed(t))  # b starts at x
                    merged = _canon_strand(tuple(reversed(b)) + a[1:])
                    st2 = Counter(strands)
                    st2[t] -= 1
                    if st2[t] == 0:
                        del st2[t]
                    st2[merged] += 1
                    key = (tuple(sorted(st2.items())), closed)
                    nxt[key] += cnt * mult
        work = nxt
    return dict(done)


@lru_cache(maxsize=4096)
def _pair_counts_cached(g: Graph, m: tuple[int, ...]):
    return _pair_counts(g, m)


@dataclass
class RpmExact:
    Z: float
    class_means: dict  # LoopClass -> E[k~_gamma]
    edge_means: list  # E[k~_e], double links on e
    localtime_means: list  # E[n_x]
    distribution: dict  # (m, closed multiset) -> weight / Z
    m_cap: int
    total_cap: int | None

    def expect(self, fn) -> float:
        """E[fn(counts)] with ``counts`` a Counter LoopClass -> multiplicity."""
        total = 0.0
        for (m, closed), p in self.distribution.items():
            total += p * fn(Counter({LoopClass(w): k for w, k in closed}))
        return total

    def edge_counts(self, g: Graph, closed) -> list[int]:
        out = [0] * g.n_edges
        for w, k in closed:
            if len(w) == 2:
                out[g.edge_id(*w)] += k
        return out


def enumerate_rpm(g: Graph, U: WeightFunction, N, beta, m_cap: int, total_cap: int | None = None) -> RpmExact:
    """Exact sums over all configurations with ``m_e <= m_cap`` (and ``sum m <= total_cap``).

    Truncating the total number of links at T matches truncating the loop soup
    at total length T, since the cycles cover every link exactly once.
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    if m_cap < 0:
        raise ValueError(f"m_cap must be >= 0, got {m_cap}")
    dist = {}
    Z = 0.0
    for m in link_vectors(g, m_cap, total_cap):
        base = 1.0
        for me in m:
            base *= beta**me / math.factorial(me)
        if base == 0.0:
            continue
        for n in (sum(m[e] for _, e in g.adjacency[x]) // 2 for x in g.vertices):
            base *= U.value(n)
        if base == 0.0:
            continue
        for closed, cnt in _pair_counts_cached(g, m).items():
            cycles = sum(k for _, k in closed)
            wgt = base * cnt * N**cycles
            dist[(m, closed)] = dist.get((m, closed), 0.0) + wgt
            Z += wgt
    class_means = defaultdict(float)
    edge_means = [0.0] * g.n_edges
    lt = [0.0] * g.n_vertices
    for (m, closed), wgt in dist.items():
        p = wgt / Z
        dist[(m, closed)] = p
        for word, k in closed:
            class_means[LoopClass(word)] += p * k
            if len(word) == 2:
                edge_means[g.edge_id(*word)] += p * k
        for x in g.vertices:
            lt[x] += p * sum(m[e] for _, e in g.adjacency[x]) / 2
    return RpmExact(Z, dict(class_means), edge_means, lt, dist, m_cap, total_cap)


def single_edge_shell(N, m: int) -> int | float:
    """Sum over pairings of N^{#cycles} on one edge with m links (m even).

    Fixing pi_x, the cycles correspond to cycles of a permutation of the m/2
    pairs, giving prod_{i<m/2} (N + 2i); pi_x has (m-1)!! choices.
    """
    if m % 2:
        return 0
    k = m // 2
    prod = 1
    for i in range(k):
        prod *= N + 2 * i
    return math.prod(range(m - 1, 0, -2)) * prod


def crosscheck_equivalence(g: Graph, U: WeightFunction, N, beta, T_max: int, classes=None, edge_functions=None) -> dict:
    """Gaps between loop-soup and path-model expectations at matched truncation.

    ``classes`` defaults to every class of length <= T_max; ``edge_functions``
    maps an edge id to f so that E[prod f_e(k_e)] is compared as well.
    """
    from .rwls_exact import soup_table
    from .loops import bounce

    tab = soup_table(g, U, N, beta, T_max)
    rpm = enumerate_rpm(g, U, N, beta, T_max, total_cap=T_max)
    classes = tab.classes if classes is None else [c if isinstance(c, LoopClass) else canonicalize(c, g) for c in classes]
    gaps = {}
    for c in classes:
        lhs = float(tab.class_moment(c, 1))
        rhs = rpm.class_means.get(c, 0.0)
        gaps[c] = abs(lhs - rhs)
    out = {"class_gaps": gaps, "Z_rwls": float(tab.Z), "Z_rpm": rpm.Z}
    if edge_functions:
        mods = {bounce(*g.edges[e]): f for e, f in edge_functions.items()}
        lhs = float(tab.expect_class_functions(mods))

        def fn(counts):
            val = 1.0
            for e, f in edge_functions.items():
                val *= f(counts.get(bounce(*g.edges[e]), 0))
            return val

        rhs = rpm.expect(fn)
        out["edge_function_gap"] = abs(lhs - rhs)
    out["max_gap"] = max([*gaps.values(), out.get("edge_function_gap", 0.0), 0.0])
    return out
