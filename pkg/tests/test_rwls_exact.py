import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import iv

from loopsoup import rwls_exact as rx
from loopsoup.graphs import build_named
from loopsoup.loops import bounce, canonicalize, enumerate_classes, enumerate_rooted_loops, open_walks
from loopsoup.weights import make_weight

EDGE = build_named("single_edge")
PATH3 = build_named("path", n=3)
C4 = build_named("cycle", n=4)
ONE = make_weight("constant")
FACT = make_weight("factorial")
SPIN2 = make_weight("spin", N=2)


def _ordered_tuple_sum(g, U, N, beta, T, walk=None):
    """Literal sum over ordered tuples of rooted oriented loops, weight
    (1/k!) prod (N/2) beta^|l| / |l| * prod_x U(n_x), total length <= T.
    With ``walk`` the walk's local times are added and its length counts
    towards T."""
    rooted = {L: enumerate_rooted_loops(g, L) for L in range(2, T + 1)}
    base = [0] * g.n_vertices
    budget0 = T
    if walk is not None:
        for v in walk:
            base[v] += 1
        budget0 -= len(walk) - 1
    total = 0.0

    def rec(k, budget, lt, wgt):
        nonlocal total
        u = 1.0
        for x in range(g.n_vertices):
            u *= U.value(lt[x])
        total += wgt * u / math.factorial(k)
        for L in range(2, budget + 1):
            for r in rooted[L]:
                lt2 = list(lt)
                for v in r[:-1]:
                    lt2[v] += 1
                rec(k + 1, budget - L, lt2, wgt * N / 2 * beta**L / L)

    rec(0, budget0, base, 1.0)
    return total


def test_partition_function_closed_form():
    r = rx.partition_function(EDGE, ONE, 2, 0.5, 40)
    assert abs(float(r.value) - 4 / 3) <= 1e-10
    assert r.tail_estimate >= 0


def test_partition_function_partial_sum_exact():
    r = rx.partition_function(EDGE, ONE, 2, Fraction(1), 8, exact=True)
    assert r.value == 5


def test_beta_zero():
    for g in (EDGE, C4, PATH3):
        assert float(rx.partition_function(g, FACT, 2, 0.0, 8).value) == 1.0
        assert float(rx.density_rho(g, FACT, 2, 0.0, 8, 2).value) == 0.0
        assert float(rx.two_point(g, FACT, 2, 0.0, 8, 0, 1).value) == 0.0


@pytest.mark.parametrize("g,T", [(EDGE, 10), (C4, 6), (PATH3, 8)], ids=["edge", "cycle4", "path3"])
@pytest.mark.parametrize("U", [ONE, FACT, SPIN2, make_weight("pairwise", alpha=0.7)], ids=str)
def test_partition_function_vs_ordered_tuples(g, T, U):
    got = float(rx.partition_function(g, U, 1.5, 0.4, T).value)
    want = _ordered_tuple_sum(g, U, 1.5, 0.4, T)
    assert got == pytest.approx(want, rel=1e-12)


def test_multiset_oracle_agrees():
    for U in (ONE, FACT):
        a = float(rx.partition_function(C4, U, 3, 0.5, 8).value)
        assert a == pytest.approx(rx.multiset_sum(C4, U, 3, 0.5, 8), rel=1e-12)


def test_class_moment_poisson():
    g1 = bounce(0, 1)
    assert float(rx.class_moment(EDGE, ONE, 2, 0.5, 40, g1, 1).value) == pytest.approx(0.25, abs=1e-10)
    assert float(rx.class_moment(EDGE, ONE, 2, 0.5, 40, g1, 2).value) == pytest.approx(1 / 16, abs=1e-10)
    assert float(rx.class_moment(EDGE, ONE, 2, 0.5, 4, bounce(0, 1, 6), 1).value) == 0.0


@pytest.mark.parametrize("g", [EDGE, C4], ids=["edge", "cycle4"])
def test_poisson_oracle_all_classes(g):
    # moments a with a*alpha well inside the truncation budget, so the
    # missing tail (2 beta)^r with r >= 8 is below the tolerance
    N, beta, T = 2, 0.05, 30 if g is EDGE else 16
    tab = rx.soup_table(g, ONE, N, beta, T)
    for c in enumerate_classes(g, 6):
        lam = rx.poisson_mean(c, N, beta)
        amax = (T - 8) // c.alpha
        assert amax >= 1
        for a in range(1, min(amax, 3) + 1):
            assert float(tab.class_moment(c, a)) == pytest.approx(lam**a, rel=1e-6)
        dist = np.array([float(p) for p in tab.class_distribution(c, amax)])
        want = [math.exp(-lam) * lam**j / math.factorial(j) for j in range(amax + 1)]
        assert np.allclose(dist, want, rtol=1e-6, atol=0)


def test_density_examples():
    assert float(rx.density_rho(EDGE, ONE, 2, 0.5, 40, 2).value) == pytest.approx(1 / 8, abs=1e-10)
    beta, N = 0.15, 2
    assert float(rx.density_rho(C4, ONE, N, beta, 16, 2).value) == pytest.approx(N * beta**2 / 2, rel=1e-6)


def test_two_point_single_edge_vs_double_enumeration():
    N, beta, T = 2, 0.3, 10
    for U in (ONE, FACT, SPIN2):
        num = 0.0
        for walk in open_walks(EDGE, 0, 1, T - 1):
            num += beta ** (len(walk) - 1) * _ordered_tuple_sum(EDGE, U, N, beta, T, walk=walk)
        den = _ordered_tuple_sum(EDGE, U, N, beta, T)
        assert float(rx.two_point(EDGE, U, N, beta, T, 0, 1).value) == pytest.approx(num / den, rel=1e-12)


def test_two_point_symmetric():
    for x, y in ((0, 1), (0, 2), (1, 2)):
        a = float(rx.two_point(PATH3, FACT, 2, 0.4, 10, x, y).value)
        b = float(rx.two_point(PATH3, FACT, 2, 0.4, 10, y, x).value)
        assert a == pytest.approx(b, rel=1e-12)


def test_two_point_spin_bessel():
    # O(2) spins on one edge: <cos(theta_x - theta_y)>/2 = I1/(2 I0)
    beta = 0.7
    v = float(rx.two_point(EDGE, SPIN2, 2, beta, 40, 0, 1).value)
    assert v == pytest.approx(iv(1, beta) / (2 * iv(0, beta)), rel=1e-10)


def test_decomposition_identity_cases():
    sq = canonicalize([0, 1, 2, 3, 0])
    for U in (ONE, FACT):
        for a in (1, 2):
            r = rx.verify_decomposition(C4, U, 2, 0.3, 16, sq, a)
            assert r["gap"] <= 1e-9
    r = rx.verify_decomposition(EDGE, FACT, 2, 0.3, 20, bounce(0, 1), 2)
    assert r["psi"] == 1 and r["gap"] <= 1e-15


def test_decomposition_exact_rationals():
    sq = canonicalize([0, 1, 2, 3, 0])
    r = rx.verify_decomposition(C4, FACT, 2, Fraction(3, 10), 8, sq, 1, exact=True)
    assert r["gap"] == 0


def test_open_decomposition():
    for U in (ONE, SPIN2):
        assert rx.verify_open_decomposition(EDGE, U, 2, 0.3, 14, 0, 1)["gap"] <= 1e-9
        for x, y in ((0, 1), (1, 2)):
            assert rx.verify_open_decomposition(PATH3, U, 2, 0.3, 14, x, y)["gap"] <= 1e-9
    r = rx.verify_open_decomposition(EDGE, ONE, 2, 0.0, 14, 0, 1)
    assert r["lhs"] == 0 and r["rhs"] == 0
    with pytest.raises(ValueError):
        rx.verify_open_decomposition(build_named("cycle", n=3), ONE, 2, 0.3, 8, 0, 1)


def test_truncation_monotone():
    vals = [float(rx.partition_function(C4, FACT, 2, 0.6, T).value) for T in range(2, 14, 2)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_prop51_lambda_bound():
    for g in (EDGE, C4):
        for beta in (0.3, 0.7, 1.0):
            tab = rx.soup_table(g, SPIN2, 2, beta, 12)
            for c in enumerate_classes(g, 6):
                lam = rx.lambda_bound(c, 2)
                for a in (1, 2, 3):
                    assert float(tab.class_moment(c, a)) <= lam**a


def test_theorem2_upper_bound_exact():
    for g in (EDGE, C4, PATH3):
        for beta in (0.3, 1.0, 2.0):
            for k in (2, 4):
                rho = float(rx.density_rho(g, SPIN2, 2, beta, 12, k).value)
                assert rho <= rx.density_upper_bound(2, g.max_degree, k)


def test_connection_single_edge():
    # Poissonised bounce classes: 1 - (1 - beta^2)^{N/2}
    v = float(rx.connection_probability(EDGE, ONE, 2, 0.5, 40, 0, 1).value)
    assert v == pytest.approx(1 - (1 - 0.25), abs=1e-10)
    v = float(rx.connection_probability(EDGE, ONE, 3, 0.5, 60, 0, 1).value)
    assert v == pytest.approx(1 - 0.75**1.5, abs=1e-10)


def test_sandwich_middle_bessel():
    beta = 0.8
    v = float(rx.sandwich_middle(EDGE, SPIN2, 2, beta, 40, 0, 1).value)
    assert v == pytest.approx(iv(2, beta) / (8 * iv(0, beta)), rel=1e-9)


def test_record_fields():
    r = rx.partition_function(EDGE, ONE, 2, 0.5, 10)
    rec = r.record()
    assert set(rec) >= {"quantity", "params", "value", "T_max", "tail_estimate"}


def test_negative_beta_rejected():
    with pytest.raises(ValueError):
        rx.partition_function(EDGE, ONE, 2, -0.1, 10)
