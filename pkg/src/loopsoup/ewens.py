"""Ewens permutations: normalizer, sampler, fixed-point laws and the domination tail."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from numba import njit


def _check_theta(theta):
    if not theta > 0:
        raise ValueError(f"theta must be > 0, got {theta}")


def ewens_normalizer(theta, n: int):
    """Z(theta, n) = theta (theta+1) ... (theta+n-1); exact for int/Fraction theta."""
    _check_theta(theta)
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    out = 1 if isinstance(theta, (int, Fraction)) else 1.0
    for i in range(n):
        out *= theta + i
    return out


def cycle_count(perm) -> int:
    perm = list(perm)
    seen = [False] * len(perm)
    c = 0
    for i in range(len(perm)):
        if not seen[i]:
            c += 1
            j = i
            while not seen[j]:
                seen[j] = True
                j = perm[j]
    return c


def ewens_law(theta, n: int) -> dict:
    """Exact law over all n! permutations (tuples), for small n."""
    Z = ewens_normalizer(theta, n)
    return {p: theta ** cycle_count(p) / Z for p in itertools.permutations(range(n))}


@njit(cache=True)
def _sample_into(theta, n, rng, out):
    # sequential insertion: i starts a cycle w.p. theta/(theta+i), else goes
    # right after a uniformly chosen earlier element
    for i in range(n):
        if rng.random() * (theta + i) < theta:
            out[i] = i
        else:
            j = rng.integers(0, i)
            out[i] = out[j]
            out[j] = i


@njit(cache=True)
def _sample_many(theta, n, draws, rng):
    out = np.empty((draws, n), dtype=np.int64)
    for d in range(draws):
        _sample_into(theta, n, rng, out[d])
    return out


def sample_ewens(theta, n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Permutation(s) of range(n) with law theta^{c(sigma)} / Z(theta, n)."""
    _check_theta(theta)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if size is None:
        return _sample_many(float(theta), n, 1, rng)[0]
    return _sample_many(float(theta), n, int(size), rng)


def fixed_point_prob(theta, n: int, v, a):
    """P(|FP(sigma) ∩ A_j| = a_j for all j) for disjoint blocks with |A_j| = v_j.

    Inclusion-exclusion over extra fixed points among the r = sum(v_j - a_j)
    unconstrained block points: fixing f points of a permutation of [n] leaves
    a free permutation of n - f elements carrying theta^{c} weight.
    """
    _check_theta(theta)
    v, a = list(v), list(a)
    if len(v) != len(a):
        raise ValueError("v and a must have the same length")
    if sum(v) > n or min(v, default=0) < 0:
        raise ValueError("blocks must be disjoint subsets of [n]")
    if any(aj > vj or aj < 0 for aj, vj in zip(a, v)):
        return 0
    f = sum(a)
    r = sum(vj - aj for vj, aj in zip(v, a))
    exact = isinstance(theta, (int, Fraction))
    if exact:
        theta = Fraction(theta)
    choose = 1
    for vj, aj in zip(v, a):
        choose *= math.comb(vj, aj)
    total = 0
    for i in range(r + 1):
        total += (-1) ** i * math.comb(r, i) * theta**i * ewens_normalizer(theta, n - f - i)
    val = choose * theta**f * total / ewens_normalizer(theta, n)
    return val if exact else float(val)


def fixed_point_tail(theta, n: int, v: int, k: int):
    """q(theta, n, v, k) = P(at least k fixed points among v given points)."""
    if k <= 0:
        return 1 if isinstance(theta, (int, Fraction)) else 1.0
    return sum(fixed_point_prob(theta, n, [v], [j]) for j in range(k, v + 1))


def fixed_point_prob_bruteforce(theta, n: int, v, a):
    blocks = []
    start = 0
    for vj in v:
        blocks.append(range(start, start + vj))
        start += vj
    if isinstance(theta, (int, Fraction)):
        theta = Fraction(theta)
    Z = ewens_normalizer(theta, n)
    total = 0
    for p in itertools.permutations(range(n)):
        if all(sum(p[i] == i for i in blk) == aj for blk, aj in zip(blocks, a)):
            total += theta ** cycle_count(p)
    return total / Z


def domination_tail(N, k: int) -> float:
    """min{1, sum_{j >= k} c^j / j!} with c = max(1, N/2)."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    c = max(1.0, N / 2)
    # tail of the exponential series, summed until terms vanish
    if k == 0:
        return 1.0
    head = sum(c**j / math.factorial(j) for j in range(k))
    tail = math.exp(c) - head
    if tail < 1e-12 * math.exp(c):
        term, tail, j = c**k / math.factorial(k), 0.0, k
        while term > 1e-300 and term > tail * 1e-17:
            tail += term
            j += 1
            term *= c / j
    return min(1.0, tail)


def fixed_point_domination_check(n_max: int = 10, Ns=(1, 2, 3, 4)) -> tuple[bool, list]:
    """q(N/2, n, v, k) <= P(Y >= k) over the whole grid; returns violations."""
    bad = []
    for N in Ns:
        theta = Fraction(N, 2)
        for n in range(0, n_max + 1):
            for v in range(0, n + 1):
                for k in range(0, n + 1):
                    q = fixed_point_tail(theta, n, v, k)
                    if float(q) > domination_tail(N, k) + 1e-12:
                        bad.append((N, n, v, k, float(q)))
    return (not bad), bad


def cycle_count_distribution(theta, n: int) -> np.ndarray:
    """P(c(sigma) = c) via unsigned Stirling numbers of the first kind."""
    s = [[0] * (n + 1) for _ in range(n + 1)]
    s[0][0] = 1
    for i in range(1, n + 1):
        for c in range(1, i + 1):
            s[i][c] = s[i - 1][c - 1] + (i - 1) * s[i - 1][c]
    Z = ewens_normalizer(float(theta), n)
    return np.array([s[n][c] * float(theta) ** c / Z for c in range(n + 1)])


__all__ = [
    "ewens_normalizer",
    "sample_ewens",
    "fixed_point_prob",
    "fixed_point_tail",
    "domination_tail",
    "ewens_law",
    "cycle_count",
    "fixed_point_domination_check",
    "cycle_count_distribution",
    "fixed_point_prob_bruteforce",
]
