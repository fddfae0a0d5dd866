import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from loopsoup.threshold import beta_lower_bound, chi_exact, chi_mc, chi_series
from loopsoup.weights import make_weight

ONE = make_weight("constant")
FACT = make_weight("factorial")


def _brute(U, d, k):
    dirs = [tuple((s if i == j else 0) for i in range(d)) for j in range(d) for s in (1, -1)]
    total = Fraction(0)
    for steps in itertools.product(dirs, repeat=k):
        pos = (0,) * d
        visits = {}
        for s in steps:
            pos = tuple(a + b for a, b in zip(pos, s))
            visits[pos] = visits.get(pos, 0) + 1
        p = Fraction(1)
        for c in visits.values():
            p *= U.exact(c)
        total += p
    return total / len(dirs) ** k


def test_examples():
    assert all(chi_exact(ONE, 2, k).value == 1 for k in range(0, 8))
    assert chi_exact(FACT, 2, 3).value == Fraction(7, 8)
    # U(0) = U(1) = 1
    for U in (FACT, make_weight("pairwise", alpha=0.5)):
        assert float(chi_exact(U, 2, 1).value) == 1


@pytest.mark.parametrize("d", [1, 2, 3])
def test_bruteforce_agreement(d):
    for k in range(1, 7 if d < 3 else 5):
        assert chi_exact(FACT, d, k).value == _brute(FACT, d, k)


def test_budget():
    with pytest.raises(ValueError):
        chi_exact(FACT, 2, 16)


def test_hard_core_pruning():
    U = make_weight("table", values=[1, 1, 0])
    for k in range(1, 7):
        assert chi_exact(U, 2, k).value == _brute(U, 2, k)


def test_mc_agreement():
    rng = np.random.default_rng(0)
    e = float(chi_exact(FACT, 2, 10).value)
    m = chi_mc(FACT, 2, 10, 200_000, rng)
    assert abs(m.value - e) <= 3 * m.se
    m1 = chi_mc(ONE, 2, 10, 10_000, rng)
    assert m1.value == 1 and m1.se == 0
    with pytest.raises(ValueError):
        chi_mc(FACT, 2, 10, 100, rng)


def test_pairwise_strictly_below_one():
    m = chi_mc(make_weight("pairwise", alpha=1.0), 2, 20, 50_000, np.random.default_rng(1))
    assert m.value + 3 * m.se < 1
    assert float(chi_exact(make_weight("pairwise", alpha=1.0), 2, 6).value) < 1


def test_monotone_in_u():
    lo, hi = make_weight("pairwise", alpha=1.0), make_weight("pairwise", alpha=0.3)
    for k in range(1, 9):
        assert chi_exact(lo, 2, k).value <= chi_exact(hi, 2, k).value
        assert chi_exact(FACT, 2, k).value <= chi_exact(ONE, 2, k).value


def test_beta_lower_bound_synthetic():
    b = beta_lower_bound({k: 1.0 for k in range(1, 9)}, 2)
    assert b["rate"] == 0 and b["beta_tilde"] == 0.25
    b = beta_lower_bound({k: 2.0**-k for k in range(1, 9)}, 2)
    assert b["rate"] == pytest.approx(-math.log(2)) and b["beta_tilde"] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        beta_lower_bound({1: 1.0, 2: 0.0, 3: 0.5, 4: 0.2}, 2)
    with pytest.raises(ValueError):
        beta_lower_bound({1: 1.0, 2: 0.5}, 2)


def test_factorial_series_decreasing():
    s = chi_series(FACT, 2, 9)
    vals = [s[k].value for k in range(1, 10)]
    assert all(b < a for a, b in zip(vals[1:], vals[2:]))
    assert all(0 < v <= 1 for v in vals)
