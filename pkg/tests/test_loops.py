from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loopsoup.graphs import build_named, build_torus
from loopsoup.loops import bounce, canonicalize, class_stats, enumerate_classes, enumerate_rooted_loops


def test_canonicalize_examples():
    assert canonicalize([0, 1, 0]) == canonicalize([1, 0, 1])
    assert canonicalize([0, 1, 2, 3, 0]) == canonicalize([0, 3, 2, 1, 0])
    assert canonicalize([0, 1, 0]) != canonicalize([0, 1, 2, 3, 0])


def test_malformed_rejected():
    g = build_named("cycle", n=4)
    with pytest.raises(ValueError):
        canonicalize([0, 1, 2])
    with pytest.raises(ValueError):
        canonicalize([0, 2, 0], g)


def test_stats_examples():
    g = build_named("single_edge")
    s = class_stats(canonicalize([0, 1, 0]), g)
    assert (s.alpha, s.J, s.delta, s.q_e) == (2, 1, 1, {0: 1})
    s = class_stats(canonicalize([0, 1, 0, 1, 0]), g)
    assert (s.alpha, s.J, s.delta) == (4, 2, 1)
    c4 = build_named("cycle", n=4)
    s = class_stats(canonicalize([0, 1, 2, 3, 0]), c4)
    assert (s.alpha, s.J, s.delta) == (4, 1, 2)
    e = c4.edge_id
    assert s.q_e == {e(0, 1): 1, e(2, 3): 1}


def test_enumerate_examples():
    assert [c.alpha for c in enumerate_classes(build_named("single_edge"), 6)] == [2, 4, 6]
    assert len(enumerate_classes(build_named("single_edge"), 2)) == 1
    # 4 bounces, 1 square, 4 double bounces on one edge, 4 "cherries" x-y-x-z-x
    cls = enumerate_classes(build_named("cycle", n=4), 4)
    assert len(cls) == 13
    assert Counter(c.alpha for c in cls) == {2: 4, 4: 9}


@pytest.mark.parametrize("g", [build_named("single_edge"), build_named("cycle", n=4), build_named("path", n=3),
                               build_torus(3, 2)], ids=lambda g: g.name)
def test_class_sizes_match_orbits(g):
    max_len = 6 if g.n_vertices > 4 else 8
    step = 2 if g.is_bipartite else 1
    for length in range(2, max_len + 1, step):
        rooted = enumerate_rooted_loops(g, length)
        orbits = Counter(canonicalize(list(r)) for r in rooted)
        classes = [c for c in enumerate_classes(g, max_len) if c.alpha == length]
        assert set(orbits) == set(classes)
        for c, cnt in orbits.items():
            assert c.size == cnt


def test_class_invariants():
    g = build_torus(4, 2)
    for c in enumerate_classes(g, 6):
        s = class_stats(c, g)
        assert sum(s.n_x.values()) == s.alpha
        assert sum(s.m_e.values()) == s.alpha
        assert sum(s.q_e.values()) == s.alpha // 2
        assert (s.alpha // 2) % s.J == 0
        assert s.delta in (1, 2)
        assert canonicalize(c.sequence) == c


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from([0, 1, 2, 3]), min_size=1, max_size=6), st.integers(0, 20), st.booleans())
def test_rerooting_invariance(moves, shift, rev):
    # walk on cycle(4) then close it along the shortest way back
    g = build_named("cycle", n=4)
    seq = [0]
    for m in moves:
        seq.append((seq[-1] + (1 if m % 2 else -1)) % 4)
    while seq[-1] != 0:
        seq.append((seq[-1] - 1) % 4)
    if len(seq) < 3:
        seq = [0, 1, 0]
    word = seq[:-1]
    k = shift % len(word)
    other = word[k:] + word[:k]
    if rev:
        other = other[::-1]
    a, b = canonicalize(seq, g), canonicalize(other + [other[0]], g)
    assert a == b
    assert class_stats(a, g) == class_stats(b, g)


def test_bounce_helper():
    assert bounce(1, 0, 4) == canonicalize([0, 1, 0, 1, 0])
    with pytest.raises(ValueError):
        bounce(0, 1, 3)
