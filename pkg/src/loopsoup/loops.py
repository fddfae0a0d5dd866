"""Rooted oriented loops, their equivalence classes and class statistics."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

from .graphs import Graph


def _rotations(word):
    return [word[i:] + word[:i] for i in range(len(word))]


def _word(seq, g: Graph | None):
    seq = tuple(int(v) for v in seq)
    if len(seq) < 3 or seq[0] != seq[-1]:
        raise ValueError(f"a rooted loop needs l(0) = l(k) and k >= 2, got {seq}")
    word = seq[:-1]
    if g is not None:
        for i in range(len(word)):
            u, v = word[i], word[(i + 1) % len(word)]
            if not (0 <= u < g.n_vertices) or not g.has_edge(u, v):
                raise ValueError(f"step ({u}, {v}) of {seq} is not an edge of {g.name}")
    else:
        for i in range(len(word)):
            if word[i] == word[(i + 1) % len(word)]:
                raise ValueError(f"loop {seq} has a step that stays put")
    return word


@dataclass(frozen=True)
class LoopClass:
    """Equivalence class of a rooted oriented loop under re-rooting and reversal.

    ``word`` is the canonical representative without its repeated endpoint:
    the lexicographically smallest rotation of either orientation.
    """

    word: tuple[int, ...]

    @property
    def sequence(self) -> tuple[int, ...]:
        return self.word + (self.word[0],)

    @property
    def alpha(self) -> int:
        return len(self.word)

    @property
    def J(self) -> int:
        a = len(self.word)
        for p in range(1, a + 1):
            if a % p == 0 and self.word[p:] + self.word[:p] == self.word:
                return a // p
        return 1  # pragma: no cover

    @property
    def delta(self) -> int:
        rev = tuple(reversed(self.word))
        return 1 if rev in set(_rotations(self.word)) else 2

    @property
    def size(self) -> int:
        """Number of rooted oriented loops in the class."""
        return self.alpha * self.delta // self.J

    def steps(self):
        w = self.word
        return [(w[i], w[(i + 1) % len(w)]) for i in range(len(w))]

    def local_times(self) -> dict[int, int]:
        return dict(Counter(self.word))

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self.word)

    def edge_counts(self, g: Graph) -> dict[int, int]:
        """m_e: number of steps along each edge."""
        return dict(Counter(g.edge_id(u, v) for u, v in self.steps()))

    def even_steps(self, g: Graph) -> dict[int, int]:
        """q_e of the canonical representative, steps 2j -> 2j+1 for j < alpha/2."""
        if self.alpha % 2:
            raise ValueError(f"even steps need an even-length loop, got alpha={self.alpha}")
        w = self.word
        return dict(Counter(g.edge_id(w[2 * j], w[2 * j + 1]) for j in range(self.alpha // 2)))

    def __repr__(self):
        return f"LoopClass({list(self.sequence)})"


def canonicalize(seq, g: Graph | None = None) -> LoopClass:
    """Class of the closed vertex sequence ``seq`` (first entry repeated at the end)."""
    word = _word(seq, g)
    rev = tuple(reversed(word))
    return LoopClass(min(min(_rotations(word)), min(_rotations(rev))))


def bounce(u: int, v: int, length: int = 2) -> LoopClass:
    """The back-and-forth loop of the given even length on edge {u, v}."""
    if length < 2 or length % 2:
        raise ValueError(f"bounce loops have even length >= 2, got {length}")
    return canonicalize([u, v] * (length // 2) + [u])


@dataclass(frozen=True)
class ClassStats:
    alpha: int
    J: int
    delta: int
    size: int
    n_x: dict
    m_e: dict
    q_e: dict | None
    support: frozenset


def class_stats(gamma: LoopClass, g: Graph) -> ClassStats:
    return ClassStats(
        alpha=gamma.alpha,
        J=gamma.J,
        delta=gamma.delta,
        size=gamma.size,
        n_x=gamma.local_times(),
        m_e=gamma.edge_counts(g),
        q_e=gamma.even_steps(g) if gamma.alpha % 2 == 0 else None,
        support=gamma.support,
    )


def enumerate_classes(g: Graph, max_len: int) -> list[LoopClass]:
    """Every class with length ``<= max_len``, sorted by (length, word)."""
    if max_len < 2:
        raise ValueError(f"max_len must be >= 2, got {max_len}")
    return list(_enumerate_cached(g, max_len))


@lru_cache(maxsize=32)
def _enumerate_cached(g: Graph, max_len: int) -> tuple[LoopClass, ...]:
    adj = [sorted(g.neighbors(x)) for x in g.vertices]
    found = set()
    for r in g.vertices:
        # the canonical word starts at its smallest vertex, so roots only need
        # walks that stay on vertices >= r
        word = [r]

        def extend():
            u = word[-1]
            for w in adj[u]:
                if w < r:
                    continue
                if w == r and len(word) >= 2:
                    c = tuple(word)
                    if c == min(_rotations(c)) and c <= min(_rotations(tuple(reversed(c)))):
                        found.add(c)
                if len(word) < max_len:
                    word.append(w)
                    extend()
                    word.pop()

        extend()
    return tuple(LoopClass(w) for w in sorted(found, key=lambda w: (len(w), w)))


def enumerate_rooted_loops(g: Graph, length: int):
    """All rooted oriented loops of a given length as closed tuples (brute-force oracle)."""
    out = []
    for r in g.vertices:
        stack = [(r,)]
        while stack:
            path = stack.pop()
            if len(path) == length + 1:
                if path[-1] == r:
                    out.append(path)
                continue
            for w in g.neighbors(path[-1]):
                stack.append(path + (w,))
    return out


def open_walks(g: Graph, x: int, y: int, max_len: int):
    """Nearest-neighbour walks from x to y with 1..max_len steps, as vertex tuples."""
    out = []
    stack = [(x,)]
    while stack:
        path = stack.pop()
        if len(path) > 1 and path[-1] == y:
            out.append(path)
        if len(path) - 1 < max_len:
            for w in g.neighbors(path[-1]):
                stack.append(path + (w,))
    out.sort(key=lambda p: (len(p), p))
    return out
