import math
from fractions import Fraction

import pytest

from loopsoup.weights import check_m_good, check_nice, make_weight


def test_examples():
    assert make_weight("spin", N=2).exact(1) == Fraction(1, 2)
    U = make_weight("pairwise", alpha=0.3)
    assert U(0) == 1 and U(1) == 1
    assert make_weight("factorial").exact(4) == Fraction(1, 24)


@pytest.mark.parametrize("kind,params", [("spin", {"N": 2}), ("factorial", {}), ("pairwise", {"alpha": 0.5}),
                                         ("constant", {})])
def test_normalised(kind, params):
    U = make_weight(kind, **params)
    assert U(0) == 1 and U.positive


def test_spin_recursion():
    for N in range(1, 11):
        U = make_weight("spin", N=N)
        for n in range(200):
            assert U(n + 1) * (2 * n + N) == pytest.approx(U(n), rel=1e-12)


def test_spin_exact_recursion():
    U = make_weight("spin", N=3)
    for n in range(20):
        assert U.exact(n + 1) * (2 * n + 3) == U.exact(n)


def test_invalid_params():
    with pytest.raises(ValueError):
        make_weight("spin", N=1.5)
    with pytest.raises(ValueError):
        make_weight("spin", N=0)
    with pytest.raises(ValueError):
        make_weight("pairwise", alpha=-1)


def test_m_good():
    assert check_m_good(make_weight("factorial"), 1, 100).ok
    r = check_m_good(make_weight("constant"), 5, 100)
    assert not r.ok and r.witness == (6,)
    assert check_m_good(make_weight("spin", N=3), 1, 100).ok


def test_nice():
    assert check_nice(make_weight("factorial"), 1, 60).ok
    assert not check_nice(make_weight("constant"), 5, 60).ok
    # ratio exp(-alpha n) exceeds 1/n for small n when alpha = 0.5, so M = 2 is needed
    assert not check_nice(make_weight("pairwise", alpha=0.5), 1, 60).ok
    assert check_nice(make_weight("pairwise", alpha=0.5), 2, 60).ok


def test_submultiplicative_symmetric():
    U = make_weight("pairwise", alpha=0.5)
    for n in range(10):
        for k in range(10):
            assert U(n + k) <= U(n) * U(k) * (1 + 1e-12)
            assert math.isclose(U(n) * U(k), U(k) * U(n))


def test_table_weight():
    U = make_weight("table", values=[1, 1, 0])
    assert not U.positive
    assert U(5) == 0
