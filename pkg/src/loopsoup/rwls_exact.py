"""Exact truncated sums over loop-soup configurations.

A configuration is reduced to its class multiset ``rho = {gamma: k_gamma}``
with weight

    nu(rho) = prod_gamma (w_gamma^k / k!) * prod_x U(n_x(rho)),
    w_gamma = N beta^alpha delta / (2 J).

The U-free part factorizes over classes, so the sum over multisets with
total length ``<= T_max`` is a truncated product of exponential series in
the local-time variables.  The table ``F[n]`` holds that product, indexed by
the local-time vector ``n`` in mixed radix ``T_max + 1``; every observable is
then a weighted sum of ``F(n) U(n + shift)``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np

from .graphs import Graph
from .loops import LoopClass, bounce, canonicalize, enumerate_classes, open_walks
from .weights import WeightFunction

MAX_TABLE = 20_000_000


@dataclass(frozen=True)
class ExactResult:
    value: float | Fraction
    T_max: int
    tail_estimate: float = 0.0
    quantity: str = ""
    params: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)

    def record(self) -> dict:
        v = self.value
        return {
            "quantity": self.quantity,
            "params": self.params,
            "value": float(v),
            "exact": str(v) if isinstance(v, Fraction) else None,
            "T_max": self.T_max,
            "tail_estimate": float(self.tail_estimate),
        }


def _num(x, exact):
    if not exact:
        return float(x)
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(x)


def _check_params(g, N, beta, T_max):
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    if N <= 0:
        raise ValueError(f"N must be > 0, got {N}")
    if T_max < 0:
        raise ValueError(f"T_max must be >= 0, got {T_max}")
    if g.is_bipartite and T_max % 2:
        raise ValueError(f"T_max must be even on bipartite graphs, got {T_max}")


def falling(k, a):
    out = 1
    for i in range(a):
        out *= k - i
    return out


class SoupTable:
    """Truncated class-multiset sums for one parameter point.

    ``exact=True`` switches to rational arithmetic (object arrays of
    :class:`Fraction`), which needs rational U, beta and N.
    """

    def __init__(self, g: Graph, U: WeightFunction, N, beta, T_max: int, exact: bool = False):
        _check_params(g, N, beta, T_max)
        self.g, self.U, self.T = g, U, T_max
        self.exact = exact
        self.N = _num(N, exact)
        self.beta = _num(beta, exact)
        V = g.n_vertices
        self.base = B = T_max + 1
        size = B**V
        if size > MAX_TABLE:
            raise ValueError(f"local-time table of size {size} exceeds the limit {MAX_TABLE}")
        self.size = size
        self.strides = B ** np.arange(V, dtype=np.int64)
        idx = np.arange(size, dtype=np.int64)
        self.digits = (idx[:, None] // self.strides[None, :]) % B
        self.deg = self.digits.sum(axis=1)
        dtype = object if exact else np.float64
        self.dtype = dtype
        uvals = [U.exact(n) if exact else U.value(n) for n in range(B)]
        ug = np.ones(size, dtype=dtype)
        for x in range(V):
            col = np.array(uvals, dtype=dtype)[self.digits[:, x]]
            ug = ug * col
        self.Ugrid = np.where(self.deg <= T_max, ug, 0 if not exact else Fraction(0))
        self.classes = enumerate_classes(g, T_max) if T_max >= 2 else []
        self._vec = {}
        for c in self.classes:
            self._vec[c] = self.local_time_vector(c)
        self.F = self._build({})
        self.Z = self._total(self.F)

    # -- bookkeeping -------------------------------------------------------

    def local_time_vector(self, c: LoopClass) -> np.ndarray:
        v = np.zeros(self.g.n_vertices, dtype=np.int64)
        for x, n in c.local_times().items():
            v[x] = n
        return v

    def class_weight(self, c: LoopClass):
        """w_gamma = N beta^alpha delta / (2J)."""
        if self.exact:
            return self.N * self.beta**c.alpha * Fraction(c.delta, 2 * c.J)
        return self.N * self.beta**c.alpha * c.delta / (2 * c.J)

    def offset(self, v) -> int:
        return int(np.dot(v, self.strides))

    def _zero(self):
        return Fraction(0) if self.exact else 0.0

    def _factorial(self, k):
        return math.factorial(k) if self.exact else float(math.factorial(k))

    # -- table construction ---------------------------------------------------

    def _apply(self, F, v, coeffs):
        """Multiply F by sum_k coeffs[k] z^(k v), truncated at total degree T."""
        off = self.offset(v)
        length = int(v.sum())
        out = F * coeffs[0]
        for k in range(1, len(coeffs)):
            if coeffs[k] == 0:
                continue
            cap = self.T - k * length
            if cap < 0:
                break
            shift = k * off
            src = np.where(self.deg[: self.size - shift] <= cap, F[: self.size - shift], self._zero())
            out[shift:] = out[shift:] + coeffs[k] * src
        return out

    def _build(self, mods: dict):
        """F for the product over classes; ``mods`` maps a class to f so that its
        factor becomes sum_k f(k) w^k / k! instead of exp(w)."""
        groups = defaultdict(lambda: self._zero())
        vecs = {}
        for c in self.classes:
            if c in mods:
                continue
            key = tuple(self._vec[c])
            groups[key] = groups[key] + self.class_weight(c)
            vecs[key] = self._vec[c]
        F = np.zeros(self.size, dtype=self.dtype)
        if self.exact:
            F[:] = Fraction(0)
            F[0] = Fraction(1)
        else:
            F[0] = 1.0
        for key in sorted(groups):
            p = groups[key]
            if p == 0:
                continue
            length = sum(key)
            kmax = self.T // length
            coeffs = [p**k / self._factorial(k) for k in range(kmax + 1)]
            F = self._apply(F, vecs[key], coeffs)
        for c, f in mods.items():
            v = self._vec.get(c)
            if v is None:
                # class longer than the cap: only k = 0 survives
                F = F * f(0)
                continue
            w = self.class_weight(c)
            kmax = self.T // c.alpha
            coeffs = [f(k) * w**k / self._factorial(k) for k in range(kmax + 1)]
            F = self._apply(F, v, coeffs)
        return F

    def _total(self, F):
        return (F * self.Ugrid).sum()

    def shifted_sum(self, v, h=None):
        """sum over n with |n| + |v| <= T of F(n) U(n + v) [h(n + v)]."""
        v = np.asarray(v, dtype=np.int64)
        length = int(v.sum())
        if length > self.T:
            return self._zero()
        off = self.offset(v)
        n = self.size - off
        mask = self.deg[:n] <= self.T - length
        vals = self.F[:n] * self.Ugrid[off:]
        if h is not None:
            vals = vals * h[off:]
        return np.where(mask, vals, self._zero()).sum()

    # -- observables -----------------------------------------------------------

    def tail_estimate(self) -> float:
        last = self.deg == self.T
        return float((self.F * self.Ugrid)[last].sum() / self.Z)

    def class_moment(self, c: LoopClass, a: int):
        """E[k(k-1)...(k-a+1)] by the shift identity."""
        if a < 1:
            raise ValueError(f"a must be >= 1, got {a}")
        if c.alpha * a > self.T:
            return self._zero()
        w = self.class_weight(c)
        return w**a * self.shifted_sum(a * self._vec[c]) / self.Z

    def expect_class_functions(self, mods: dict):
        """E[prod_gamma f_gamma(k_gamma)] by rebuilding the table with modified series."""
        return self._total(self._build(mods)) / self.Z

    def class_distribution(self, c: LoopClass, jmax: int):
        return [self.expect_class_functions({c: (lambda k, j=j: 1 if k == j else 0)}) for j in range(jmax + 1)]

    def expect_grid(self, h):
        """E[h(n)] for a function of the local-time vector, given on the grid."""
        return self._total(self.F * h) / self.Z

    def localtime_moment(self, x: int, m: int):
        h = self.digits[:, x].astype(object if self.exact else np.float64) ** m
        return self.expect_grid(h)

    def connection(self, x: int, y: int):
        """P(some loop visits both x and y)."""
        linking = {c: (lambda k: 1 if k == 0 else 0) for c in self.classes if x in c.support and y in c.support}
        return 1 - self.expect_class_functions(linking)

    def walk_table(self, x: int, y: int):
        """Walks x -> y with |walk| <= T - 1, grouped by local time (endpoints counted)."""
        out = defaultdict(lambda: self._zero())
        V = self.g.n_vertices
        frontier = {(x, tuple(int(i == x) for i in range(V))): (1 if self.exact else 1.0)}
        for j in range(1, self.T):
            nxt = defaultdict(lambda: self._zero())
            for (u, lt), wgt in frontier.items():
                for v in self.g.neighbors(u):
                    lt2 = list(lt)
                    lt2[v] += 1
                    nxt[(v, tuple(lt2))] = nxt[(v, tuple(lt2))] + wgt * self.beta
            frontier = nxt
            for (u, lt), wgt in frontier.items():
                if u == y:
                    out[(j, lt)] = out[(j, lt)] + wgt
        return out

    def two_point(self, x: int, y: int):
        """Z(x, y)/Z with |walk| + |omega| <= T."""
        if x == y:
            raise ValueError("two_point needs x != y")
        total = self._zero()
        for (j, lt), wgt in self.walk_table(x, y).items():
            # the walk uses j of the length budget, its local time j + 1
            v = np.array(lt, dtype=np.int64)
            off = self.offset(v)
            n = self.size - off
            mask = self.deg[:n] <= self.T - j
            s = np.where(mask, self.F[:n] * self.Ugrid[off:], self._zero()).sum()
            total = total + wgt * s
        return total / self.Z

    def sandwich_middle(self, x: int, y: int):
        """(1/2N) E[sum_j n_x(l_j) n_y(l_j) / ((n_x + N/2)(n_y + N/2))]."""
        half = self.N / 2
        h = 1 / ((self.digits[:, x] + half) * (self.digits[:, y] + half))
        if self.exact:
            h = np.array([1 / ((int(a) + half) * (int(b) + half)) for a, b in self.digits[:, [x, y]]], dtype=object)
        total = self._zero()
        for c in self.classes:
            nt = c.local_times()
            if x in nt and y in nt:
                total = total + nt[x] * nt[y] * self.class_weight(c) * self.shifted_sum(self._vec[c], h)
        return total / self.Z / (2 * self.N)


@lru_cache(maxsize=64)
def soup_table(g: Graph, U: WeightFunction, N, beta, T_max: int, exact: bool = False) -> SoupTable:
    return SoupTable(g, U, N, beta, T_max, exact)


def _res(tab: SoupTable, value, quantity, **params):
    return ExactResult(value, tab.T, tab.tail_estimate(), quantity, params)


def partition_function(g, U, N, beta, T_max, exact=False) -> ExactResult:
    tab = soup_table(g, U, N, beta, T_max, exact)
    return _res(tab, tab.Z, "partition_function")


def class_moment(g, U, N, beta, T_max, gamma, a, exact=False) -> ExactResult:
    tab = soup_table(g, U, N, beta, T_max, exact)
    gamma = _as_class(gamma, g)
    return _res(tab, tab.class_moment(gamma, a), "class_moment", gamma=list(gamma.sequence), a=a)


def density_rho(g, U, N, beta, T_max, k, exact=False) -> ExactResult:
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    tab = soup_table(g, U, N, beta, T_max, exact)
    total = tab._zero()
    for c in tab.classes:
        if c.alpha == k:
            total = total + tab.class_moment(c, 1)
    return _res(tab, total / g.n_vertices, "density_rho", k=k)


def two_point(g, U, N, beta, T_max, x, y, exact=False) -> ExactResult:
    tab = soup_table(g, U, N, beta, T_max, exact)
    return _res(tab, tab.two_point(x, y), "two_point", x=x, y=y)


def connection_probability(g, U, N, beta, T_max, x, y, exact=False) -> ExactResult:
    tab = soup_table(g, U, N, beta, T_max, exact)
    return _res(tab, tab.connection(x, y), "connection", x=x, y=y)


def localtime_moment(g, U, N, beta, T_max, x, m=1, exact=False) -> ExactResult:
    tab = soup_table(g, U, N, beta, T_max, exact)
    return _res(tab, tab.localtime_moment(x, m), "localtime_moment", x=x, m=m)


def sandwich_middle(g, U, N, beta, T_max, x, y, exact=False) -> ExactResult:
    tab = soup_table(g, U, N, beta, T_max, exact)
    return _res(tab, tab.sandwich_middle(x, y), "sandwich_middle", x=x, y=y)


def _as_class(gamma, g):
    return gamma if isinstance(gamma, LoopClass) else canonicalize(gamma, g)


def psi(gamma: LoopClass, N):
    k = gamma.alpha // 2
    return gamma.delta / gamma.J * (2 / N) ** (k - 1)


def verify_decomposition(g, U, N, beta, T_max, gamma, a, exact=False) -> dict:
    """Both sides of the double-link decomposition of the a-th factorial moment.

    The left side uses the shift identity on one table; the right side rebuilds
    the table with falling-factorial series on the bounce classes.
    """
    gamma = _as_class(gamma, g)
    if gamma.alpha % 2:
        raise ValueError("the decomposition needs an even-length class")
    tab = soup_table(g, U, N, beta, T_max, exact)
    lhs = tab.class_moment(gamma, a)
    k = gamma.alpha // 2
    if exact:
        ps = Fraction(gamma.delta, gamma.J) * (2 / tab.N) ** (k - 1)
    else:
        ps = psi(gamma, N)
    mods = {}
    for e, q in gamma.even_steps(g).items():
        u, v = g.edges[e]
        mods[bounce(u, v)] = lambda kk, n=a * q: falling(kk, n)
    rhs = ps**a * tab.expect_class_functions(mods)
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs), "psi": ps}


def odd_steps(g: Graph, walk) -> dict:
    """Edges used by steps 1, 3, 5, ... (0-based steps 0, 2, 4, ...) of an open walk."""
    out = defaultdict(int)
    for i in range(0, len(walk) - 1, 2):
        out[g.edge_id(walk[i], walk[i + 1])] += 1
    return dict(out)


def verify_open_decomposition(g, U, N, beta, T_max, x, y, exact=False) -> dict:
    """Two-point ratio against its double-link rewriting over walks x -> y."""
    if not g.is_bipartite:
        raise ValueError(f"{g.name} is not bipartite")
    if g.side(x) == g.side(y):
        raise ValueError(f"{x} and {y} lie on the same side of the bipartition")
    tab = soup_table(g, U, N, beta, T_max, exact)
    lhs = tab.two_point(x, y)
    if beta == 0:
        return {"lhs": lhs, "rhs": tab._zero(), "gap": abs(lhs)}
    by_q = defaultdict(int)
    for walk in open_walks(g, x, y, T_max - 1):
        j = len(walk) - 1
        by_q[(j, tuple(sorted(odd_steps(g, walk).items())))] += 1
    two_over_n = 2 / tab.N
    cache = {}
    rhs = tab._zero()
    for (j, qs), count in by_q.items():
        if qs not in cache:
            mods = {bounce(*g.edges[e]): (lambda kk, n=q: falling(kk, n)) for e, q in qs}
            cache[qs] = tab.expect_class_functions(mods)
        rhs = rhs + count * two_over_n ** ((j + 1) // 2) * cache[qs]
    rhs = rhs / tab.beta
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs)}


def poisson_mean(gamma: LoopClass, N, beta) -> float:
    """Mean of k_gamma for U = 1, where the class counts are independent Poisson."""
    return N * beta**gamma.alpha * gamma.delta / (2 * gamma.J)


def lambda_bound(gamma: LoopClass, N) -> float:
    """lambda(gamma) = (delta/J)(N/2) max(e^{N/2}, 2e/N)^{alpha/2}."""
    return gamma.delta / gamma.J * N / 2 * max(math.exp(N / 2), 2 * math.e / N) ** (gamma.alpha / 2)


def density_upper_bound(N, max_degree, k) -> float:
    """Uniform-in-beta upper bound on rho(k), k even."""
    return N * (max_degree**2 * max(math.exp(N / 2), 2 * math.e / N)) ** (k / 2)


def multiset_sum(g, U, N, beta, T_max, observable=None):
    """Literal sum of nu(rho) over class multisets of total length <= T_max.

    ``observable(counts, localtime)`` multiplies each term; ``counts`` maps
    classes to multiplicities.  Exponential in T_max; used as an oracle.
    """
    classes = enumerate_classes(g, T_max)
    V = g.n_vertices
    total = 0.0

    def rec(i, budget, counts, lt, wgt):
        nonlocal total
        if i == len(classes):
            u = 1.0
            for x in range(V):
                u *= U.value(lt[x])
            val = wgt * u
            if observable is not None:
                val *= observable(counts, lt)
            total += val
            return
        c = classes[i]
        w = N * beta**c.alpha * c.delta / (2 * c.J)
        nt = c.local_times()
        k = 0
        lt2 = list(lt)
        while k * c.alpha <= budget:
            if k:
                counts[c] = k
            rec(i + 1, budget - k * c.alpha, counts, lt2, wgt * w**k / math.factorial(k))
            k += 1
            for x, n in nt.items():
                lt2[x] += n
        counts.pop(c, None)

    rec(0, T_max, {}, [0] * V, 1.0)
    return total
