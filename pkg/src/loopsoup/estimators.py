"""Estimates from chain output, bound checks, decay fits and the lattice Green-function gap."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import stats
from scipy.sparse.linalg import spsolve
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .loops import bounce
from .mcmc import ChainOutput
from .rwls_exact import density_upper_bound, lambda_bound

N_BATCHES = 32


@dataclass
class EstimateReport:
    name: str
    estimate: float
    se: float
    n_samples: int
    ess: float
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def lower(self, level: float = 0.99) -> float:
        """One-sided lower confidence limit."""
        return self.estimate - stats.norm.ppf(level) * self.se

    def upper(self, level: float = 0.99) -> float:
        return self.estimate + stats.norm.ppf(level) * self.se

    def record(self) -> dict:
        return {"observable": self.name, "params": self.params, "estimate": self.estimate, "se": self.se,
                "n_samples": self.n_samples, "n_eff": self.ess, "seed": self.seed}


@dataclass
class BoundCheck:
    name: str
    estimate: float
    error: float
    bound: float
    satisfied: bool
    margin: float

    def record(self) -> dict:
        return dict(self.__dict__)


def batch_means(x, n_batches: int = N_BATCHES) -> tuple[float, float, float]:
    """Mean, batch-means standard error and effective sample size."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n == 0:
        raise ValueError("no samples")
    mean = float(x.mean())
    b = min(n_batches, n)
    if b < 2:
        return mean, float("inf"), 1.0
    size = n // b
    means = x[: size * b].reshape(b, size).mean(axis=1)
    se = float(means.std(ddof=1) / math.sqrt(b))
    var = float(x.var(ddof=1)) if n > 1 else 0.0
    if se == 0.0:
        ess = float(n)
    else:
        ess = min(float(n), var / se**2)
    return mean, se, ess


def _report(name, series, chain: ChainOutput, **params) -> EstimateReport:
    mean, se, ess = batch_means(series)
    p = dict(chain.params)
    p.update(params)
    return EstimateReport(name, mean, se, len(series), ess, p, chain.seed)


def rho_series(chain: ChainOutput, k: int) -> np.ndarray:
    kmax = chain.hist.shape[1] - 1
    if not 2 <= k < kmax:
        raise ValueError(f"k must lie in 2..{kmax - 1}")
    return chain.hist[:, k] / chain.graph.n_vertices


def estimate_rho(chain: ChainOutput, k: int) -> EstimateReport:
    """Density of cycles of length k per vertex."""
    if chain.graph.is_bipartite and k % 2:
        raise ValueError("odd k on a bipartite graph")
    return _report("rho", rho_series(chain, k), chain, k=k)


def micro_localtime_partial(chain: ChainOutput, K: int) -> EstimateReport:
    """sum_{k=2}^{K} k rho(k), errors propagated through the combined series."""
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    series = sum(k * rho_series(chain, k) for k in range(2, K + 1))
    return _report("micro_localtime", series, chain, K=K)


def estimate_localtime_moments(chain: ChainOutput, o: int, m: int) -> EstimateReport:
    if not 1 <= m <= 8:
        raise ValueError(f"m must lie in 1..8, got {m}")
    if o not in chain.obs_vertices:
        raise ValueError(f"vertex {o} was not observed; pass it in obs_vertices")
    series = chain.n_obs[:, chain.obs_vertices.index(o)].astype(float) ** m
    return _report("localtime_moment", series, chain, o=o, m=m)


def _group(chain: ChainOutput, key):
    if key not in chain.groups:
        raise ValueError(f"pair group {key!r} was not measured; available: {chain.groups}")
    return chain.groups.index(key)


def estimate_connection(chain: ChainOutput, key) -> EstimateReport:
    """Fraction of (translates of) pairs joined by a cycle, for a measured pair group."""
    return _report("connection", chain.conn[:, _group(chain, key)], chain, pair=str(key))


def rho_bound_check(chain: ChainOutput, k: int, level: float = 0.99) -> tuple[EstimateReport, BoundCheck, bool]:
    """rho(k) against the uniform upper bound; also whether its lower limit is positive."""
    r = estimate_rho(chain, k)
    c1 = density_upper_bound(chain.params["N"], chain.graph.max_degree, k)
    check = BoundCheck(f"rho({k}) <= c1", r.estimate, r.se, c1, r.estimate <= c1, c1 - r.estimate)
    return r, check, r.lower(level) > 0


def poisson_tail_check(chain: ChainOutput, a_range, n_se: float = 3.0) -> list[BoundCheck]:
    """P(k_e >= a) over edges against lambda^a / a! for the length-two class."""
    E = chain.graph.n_edges
    lam = lambda_bound(bounce(0, 1), chain.params["N"])
    out = []
    cum = np.cumsum(chain.edge_hist[:, ::-1], axis=1)[:, ::-1] / E  # fraction with k >= j
    for a in a_range:
        series = cum[:, a] if a < cum.shape[1] else np.zeros(chain.n_samples)
        mean, se, _ = batch_means(series)
        bound = lam**a / math.factorial(a)
        out.append(BoundCheck(f"P(k_e >= {a})", mean, se, bound, mean <= bound + n_se * se, bound - mean))
    return out


def spin_correlation_sandwich(chain: ChainOutput, key, m: int = 1, o: int | None = None, n_se: float = 3.0) -> dict:
    """Middle functional of the spin correlation and its two connection bounds.

    middle = (1/2N) E[sum_c n_x(c) n_y(c) / ((n_x + N/2)(n_y + N/2))],
    upper  = (1/2N) P(x <-> y),
    lower  = c1 P(x <-> y)^{1 + 2^{1-m}},  c1 = (1/2N) b^{-2^{1-m}},
    with b the empirical 2^m-th moment of n_o + N/2 (a plug-in, not a proof constant).
    """
    if not str(chain.params.get("weight", "")).startswith("spin"):
        raise ValueError("the sandwich needs a spin weight")
    N = chain.params["N"]
    g = _group(chain, key)
    mid_series = chain.mid[:, g] / (2 * N)
    up_series = chain.conn[:, g] / (2 * N)
    middle = batch_means(mid_series)
    upper = batch_means(up_series)
    diff = batch_means(up_series - mid_series)
    o = chain.obs_vertices[0] if o is None else o
    nt = chain.n_obs[:, chain.obs_vertices.index(o)] + N / 2
    b = float(np.mean(nt.astype(float) ** (2**m)))
    c1 = 1 / (2 * N) * b ** (-1 / 2 ** (m - 1))
    P = upper[0] * 2 * N
    lower = c1 * P ** (1 + 1 / 2 ** (m - 1))
    return {
        "middle": middle[0], "middle_se": middle[1],
        "upper": upper[0], "upper_se": upper[1],
        "lower": lower, "c1": c1, "b_hat": b,
        "upper_holds": diff[0] >= -n_se * diff[1],
        "lower_holds": lower <= middle[0] + n_se * middle[1],
        "upper_minus_middle": diff[0], "upper_minus_middle_se": diff[1],
    }


class DecayFit(RegressorMixin, BaseEstimator):
    """Least-squares fit of log P = log A - c log d.

    ``fit(d, P)`` sets ``exponent_`` (c), ``intercept_`` and ``ci_`` (the
    two-sided t interval at ``level``).
    """

    def __init__(self, level: float = 0.95):
        self.level = level

    def fit(self, d, P, sample_weight=None):
        d = check_array(np.asarray(d, dtype=float).reshape(-1, 1), ensure_min_samples=4).ravel()
        P = np.asarray(P, dtype=float).ravel()
        check_consistent_length(d, P)
        if np.any(d <= 0):
            raise ValueError("distances must be positive")
        if np.any(P <= 0):
            raise ValueError("the fit needs positive estimates at every distance")
        x, y = np.log(d), np.log(P)
        n = len(x)
        X = np.column_stack([np.ones(n), x])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ coef
        dof = n - 2
        s2 = float(resid @ resid / dof) if dof > 0 else 0.0
        cov = s2 * np.linalg.inv(X.T @ X)
        se = math.sqrt(cov[1, 1])
        t = stats.t.ppf(0.5 + self.level / 2, dof)
        self.intercept_ = float(coef[0])
        self.exponent_ = float(-coef[1])
        self.se_ = se
        self.ci_ = (self.exponent_ - t * se, self.exponent_ + t * se)
        self.residuals_ = resid
        return self

    def predict(self, d):
        check_is_fitted(self, "exponent_")
        d = np.asarray(d, dtype=float)
        return np.exp(self.intercept_) * d ** (-self.exponent_)


def fit_decay(distances, estimates, level: float = 0.95) -> dict:
    """Decay exponent of connection estimates (numbers or EstimateReports)."""
    P = [e.estimate if isinstance(e, EstimateReport) else float(e) for e in estimates]
    if all(p == 0 for p in P):
        raise ValueError("all connection estimates are zero")
    f = DecayFit(level).fit(distances, P)
    return {"c": f.exponent_, "ci": f.ci_, "se": f.se_, "level": level, "intercept": f.intercept_}


# -- Green function of the killed walk -----------------------------------------


def _box_index(L: int):
    lo = -(L // 2) + 1  # box (-L/2, L/2]^2
    return lo, lambda c: (c[0] - lo) + L * (c[1] - lo)


def green_column(L: int, y=(0, 0)) -> tuple[np.ndarray, callable]:
    """g_L(., y) for simple random walk killed on leaving the box (-L/2, L/2]^2."""
    if L < 2:
        raise ValueError(f"L must be >= 2, got {L}")
    lo, idx = _box_index(L)
    n = L * L
    rows, cols = [], []
    for j in range(L):
        for i in range(L):
            k = i + L * j
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                a, b = i + di, j + dj
                if 0 <= a < L and 0 <= b < L:
                    rows.append(k)
                    cols.append(a + L * b)
    P = sp.csr_matrix((np.full(len(rows), 0.25), (rows, cols)), shape=(n, n))
    A = (sp.identity(n, format="csr") - P).tocsc()
    rhs = np.zeros(n)
    if not all(lo <= c <= lo + L - 1 for c in y):
        raise ValueError(f"{y} is outside the box")
    rhs[idx(y)] = 1.0
    # G is symmetric, so solving (I - P) u = e_y gives g(., y)
    return spsolve(A, rhs), idx


def green_gap(L: int, x=(0, 0), ys=None) -> dict:
    """g_L(x,x) - g_L(x,y) for each y, with the (2/pi) ln|x-y| + const model.

    ``ys`` defaults to the points (r, 0), r = 1..16.  The constant is fitted
    over 2 <= |x - y| <= 16.
    """
    if ys is None:
        ys = [(x[0] + r, x[1]) for r in range(1, 17)]
    col, idx = green_column(L, x)
    gxx = float(col[idx(x)])
    r = np.array([math.hypot(y[0] - x[0], y[1] - x[1]) for y in ys])
    gaps = np.array([gxx - col[idx(y)] for y in ys])
    use = (r >= 2) & (r <= 16)
    const = float(np.mean(gaps[use] - 2 / math.pi * np.log(r[use]))) if use.any() else float("nan")
    model = 2 / math.pi * np.log(np.where(r > 0, r, 1)) + const
    resid = gaps - model
    return {"L": L, "g_xx": gxx, "r": r, "gap": gaps, "model": model, "constant": const,
            "residuals": resid, "max_residual": float(np.abs(resid[use]).max()) if use.any() else float("nan")}


def richardson_neighbor_gap(L: int, order: int = 1) -> float:
    """Extrapolate the neighbour gap from L and 2L assuming an O(L^-order) correction."""
    a = green_gap(L, ys=[(1, 0)])["gap"][0]
    b = green_gap(2 * L, ys=[(1, 0)])["gap"][0]
    f = 2.0**order
    return float((f * b - a) / (f - 1))
