"""Weakly self-avoiding walk functional chi_U(k) and the threshold surrogate.

chi_U(k) = E_o prod_x U(n_x^{(k)}) for simple random walk on Z^d, where
n_x^{(k)} counts the visits to x at steps 1..k (the start is not counted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit, types
from numba.typed import Dict

from .weights import WeightFunction

BUDGET = 10**9


@dataclass(frozen=True)
class ChiEstimate:
    k: int
    value: float | Fraction
    se: float
    method: str
    d: int

    def record(self) -> dict:
        return {"k": self.k, "method": self.method, "value": float(self.value), "se": self.se, "d": self.d,
                "exact": str(self.value) if isinstance(self.value, Fraction) else None}


def _offsets(d, side):
    out = np.zeros(2 * d, dtype=np.int64)
    stride = 1
    for i in range(d):
        out[2 * i] = stride
        out[2 * i + 1] = -stride
        stride *= side
    return out


@njit(cache=True)
def _enumerate_histograms(d, k, zero_at):
    """Count walks with the first step fixed by their visit-count histogram.

    The histogram (number of sites visited exactly j times, j >= 1) is encoded
    as sum_j h_j (k+1)^j.  Branches reaching a count c with U(c) = 0 are cut.
    """
    side = 2 * k + 3
    size = side**d
    grid = np.zeros(size, dtype=np.int64)
    offs = np.empty(2 * d, dtype=np.int64)
    stride = 1
    for i in range(d):
        offs[2 * i] = stride
        offs[2 * i + 1] = -stride
        stride *= side
    centre = 0
    stride = 1
    for i in range(d):
        centre += (k + 1) * stride
        stride *= side
    base = k + 1
    pw = np.ones(k + 2, dtype=np.int64)
    for j in range(1, k + 2):
        pw[j] = pw[j - 1] * base
    counts = Dict.empty(key_type=types.int64, value_type=types.int64)
    pos = np.empty(k + 1, dtype=np.int64)
    key = np.zeros(k + 1, dtype=np.int64)
    choice = np.zeros(k + 1, dtype=np.int64)
    pos[0] = centre
    # step 1 is fixed to direction 0
    pos[1] = centre + offs[0]
    grid[pos[1]] = 1
    key[1] = pw[1]
    if zero_at[1]:
        return counts
    if k == 1:
        counts[key[1]] = 1
        return counts
    depth = 2
    choice[2] = 0
    while depth >= 2:
        if choice[depth] == 2 * d:
            # undo step depth-1 and backtrack
            depth -= 1
            if depth >= 2:
                grid[pos[depth]] -= 1
                choice[depth] += 1
            continue
        p = pos[depth - 1] + offs[choice[depth]]
        c = grid[p]
        if zero_at[c + 1]:
            choice[depth] += 1
            continue
        kk = key[depth - 1] + pw[c + 1] - (pw[c] if c > 0 else 0)
        if depth == k:
            if kk in counts:
                counts[kk] += 1
            else:
                counts[kk] = 1
            choice[depth] += 1
            continue
        grid[p] = c + 1
        pos[depth] = p
        key[depth] = kk
        depth += 1
        choice[depth] = 0
    return counts


def _decode(key, k):
    base = k + 1
    h = []
    j = 0
    while key:
        h.append(key % base)
        key //= base
        j += 1
    return h  # h[j] = number of sites visited exactly j times (h[0] unused)


def chi_exact(U: WeightFunction, d: int, k: int) -> ChiEstimate:
    """Exact chi_U(k) by enumerating all (2d)^k walks (first step fixed by symmetry)."""
    if d < 1 or k < 0:
        raise ValueError("need d >= 1 and k >= 0")
    if (2 * d) ** k > BUDGET:
        raise ValueError(f"(2d)^k = {(2 * d) ** k} exceeds the enumeration budget {BUDGET}")
    exact = U.is_rational
    if k == 0:
        return ChiEstimate(0, Fraction(1) if exact else 1.0, 0.0, "exact", d)
    zero_at = np.array([U.value(c) == 0 for c in range(k + 2)])
    counts = _enumerate_histograms(d, k, zero_at)
    uvals = [U.exact(c) if exact else U.value(c) for c in range(k + 1)]
    total = Fraction(0) if exact else 0.0
    for key, cnt in counts.items():
        h = _decode(int(key), k)
        prod = Fraction(1) if exact else 1.0
        for j in range(1, len(h)):
            if h[j]:
                prod *= uvals[j] ** h[j]
        total += cnt * prod
    # every first direction contributes the same by symmetry
    value = total / (2 * d) ** (k - 1)
    return ChiEstimate(k, value, 0.0, "exact", d)


@njit(cache=True)
def _chi_samples(d, k, logU, samples, rng):
    side = 2 * k + 3
    size = side**d
    grid = np.zeros(size, dtype=np.int64)
    offs = np.empty(2 * d, dtype=np.int64)
    stride = 1
    for i in range(d):
        offs[2 * i] = stride
        offs[2 * i + 1] = -stride
        stride *= side
    centre = 0
    stride = 1
    for i in range(d):
        centre += (k + 1) * stride
        stride *= side
    path = np.empty(k + 1, dtype=np.int64)
    out = np.empty(samples)
    for s in range(samples):
        p = centre
        lw = 0.0
        for t in range(1, k + 1):
            p += offs[rng.integers(0, 2 * d)]
            c = grid[p]
            lw += logU[c + 1] - logU[c]
            grid[p] = c + 1
            path[t] = p
        for t in range(1, k + 1):
            grid[path[t]] = 0
        out[s] = math.exp(lw)
    return out


def chi_mc(U: WeightFunction, d: int, k: int, samples: int, rng: np.random.Generator) -> ChiEstimate:
    """Monte Carlo chi_U(k) from independent walks; se by batch means."""
    from .estimators import batch_means

    if samples < 10_000:
        raise ValueError(f"samples must be >= 10^4, got {samples}")
    logU = U.log_values(k + 1)
    vals = _chi_samples(d, k, logU, samples, rng)
    mean, se, _ = batch_means(vals)
    return ChiEstimate(k, mean, se, "mc", d)


def beta_lower_bound(chi, d: int, window: int = 4) -> dict:
    """Rate f = slope of log chi(k) over the last ``window`` values and beta~ = e^{-f}/(2d).

    ``chi`` maps k to a value (or ChiEstimate).  The single-slope variant uses
    the largest one-step slope in the window, which gives the smaller beta~.
    """
    items = sorted((int(k), float(v.value if isinstance(v, ChiEstimate) else v)) for k, v in dict(chi).items())
    if len(items) < 4:
        raise ValueError("need at least 4 values of k")
    if any(v <= 0 for _, v in items):
        raise ValueError("chi values must be positive")
    ks = np.array([k for k, _ in items], dtype=float)
    lv = np.log([v for _, v in items])
    w = min(window, len(ks))
    kw, lw = ks[-w:], lv[-w:]
    if np.all(lw == lw[0]):
        slope = 0.0
    else:
        slope = float(np.polyfit(kw, lw, 1)[0])
    steps = np.diff(lw) / np.diff(kw)
    single = float(steps.max())
    rate_top = float(lv[-1] / ks[-1]) if ks[-1] > 0 else 0.0
    return {
        "rate": slope,
        "beta_tilde": math.exp(-slope) / (2 * d),
        "rate_single": single,
        "beta_tilde_single": math.exp(-single) / (2 * d),
        "rate_top": rate_top,
        "window": [int(kw[0]), int(kw[-1])],
        "label": "finite-k surrogate of the lower bound",
    }


def chi_series(U: WeightFunction, d: int, k_max: int) -> dict:
    return {k: chi_exact(U, d, k) for k in range(1, k_max + 1)}
