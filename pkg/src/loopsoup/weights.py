"""On-site weight functions U(n) and their goodness/niceness checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

KINDS = ("constant", "spin", "factorial", "pairwise", "table")


@dataclass(frozen=True)
class WeightFunction:
    """Map ``n -> U(n)`` normalized to ``U(0) = 1`` (tables excepted).

    ``exact(n)`` returns a :class:`fractions.Fraction` for the rational
    families (constant, spin with integer N, factorial, rational tables) and
    raises for pairwise weights with ``alpha > 0``.
    """

    kind: str
    params: tuple = ()
    positive: bool = True
    _table: tuple = field(default=(), repr=False)

    @property
    def is_rational(self) -> bool:
        if self.kind == "pairwise":
            return self.param("alpha") == 0
        if self.kind == "table":
            return all(isinstance(v, (int, Fraction)) for v in self._table)
        return True

    def param(self, name):
        return dict(self.params)[name]

    def log_value(self, n: int) -> float:
        if n < 0:
            raise ValueError(f"local time must be >= 0, got {n}")
        if self.kind == "constant":
            return 0.0
        if self.kind == "spin":
            N = self.param("N")
            return float(gammaln(N / 2) - n * math.log(2) - gammaln(n + N / 2))
        if self.kind == "factorial":
            return -float(gammaln(n + 1))
        if self.kind == "pairwise":
            return -self.param("alpha") * n * (n - 1) / 2
        v = float(self._table[n]) if n < len(self._table) else 0.0
        return math.log(v) if v > 0 else -math.inf

    def value(self, n: int) -> float:
        if self.kind == "spin" or self.kind == "factorial":
            # the exact recursion keeps small n at full precision
            if n <= 170:
                return float(self.exact(n))
        return math.exp(self.log_value(n))

    def __call__(self, n: int) -> float:
        return self.value(n)

    def exact(self, n: int) -> Fraction:
        if n < 0:
            raise ValueError(f"local time must be >= 0, got {n}")
        if self.kind == "constant":
            return Fraction(1)
        if self.kind == "spin":
            N = self.param("N")
            out = Fraction(1)
            for j in range(n):
                out /= 2 * j + N
            return out
        if self.kind == "factorial":
            return Fraction(1, math.factorial(n))
        if self.kind == "pairwise":
            if self.param("alpha") == 0:
                return Fraction(1)
            raise ValueError("pairwise weights with alpha > 0 are irrational")
        if n >= len(self._table):
            return Fraction(0)
        v = self._table[n]
        if not isinstance(v, (int, Fraction)):
            raise ValueError("table holds non-rational entries")
        return Fraction(v)

    def values(self, n_max: int) -> np.ndarray:
        return np.array([self.value(n) for n in range(n_max + 1)])

    def log_values(self, n_max: int) -> np.ndarray:
        return np.array([self.log_value(n) for n in range(n_max + 1)])

    def spec(self) -> dict:
        out = {"kind": self.kind}
        out.update(dict(self.params))
        if self.kind == "table":
            out["values"] = [str(v) if isinstance(v, Fraction) else v for v in self._table]
        return out

    def __str__(self):
        if not self.params:
            return self.kind
        inner = ",".join(f"{k}={v}" for k, v in self.params)
        return f"{self.kind}({inner})"


def make_weight(kind: str, **params) -> WeightFunction:
    """Build a weight: ``constant``, ``spin(N)``, ``factorial``, ``pairwise(alpha)`` or ``table(values)``."""
    if kind == "constant":
        _no_extra(kind, params, ())
        return WeightFunction("constant")
    if kind == "spin":
        _no_extra(kind, params, ("N",))
        N = params.get("N")
        if isinstance(N, float) and N.is_integer():
            N = int(N)
        if not isinstance(N, (int, np.integer)) or isinstance(N, bool) or N < 1:
            raise ValueError(f"spin weight needs an integer N >= 1, got {N!r}")
        return WeightFunction("spin", (("N", int(N)),))
    if kind == "factorial":
        _no_extra(kind, params, ())
        return WeightFunction("factorial")
    if kind == "pairwise":
        _no_extra(kind, params, ("alpha",))
        alpha = params.get("alpha")
        if alpha is None or not np.isfinite(alpha) or alpha < 0:
            raise ValueError(f"pairwise weight needs alpha >= 0, got {alpha!r}")
        return WeightFunction("pairwise", (("alpha", float(alpha)),))
    if kind == "table":
        _no_extra(kind, params, ("values",))
        vals = params.get("values")
        if not vals:
            raise ValueError("table weight needs a nonempty 'values' list")
        clean = []
        for v in vals:
            if isinstance(v, str):
                v = Fraction(v)
            if isinstance(v, float) and v.is_integer():
                v = int(v)
            if v < 0:
                raise ValueError(f"table weight values must be >= 0, got {v}")
            clean.append(v)
        # zero beyond the table, so never strictly positive
        return WeightFunction("table", (("length", len(clean)),), positive=False, _table=tuple(clean))
    raise ValueError(f"unknown weight kind {kind!r}; expected one of {KINDS}")


def weight_from_spec(spec) -> WeightFunction:
    if isinstance(spec, WeightFunction):
        return spec
    if isinstance(spec, str):
        return make_weight(spec)
    spec = dict(spec)
    return make_weight(spec.pop("kind"), **spec)


def _no_extra(kind, params, allowed):
    extra = set(params) - set(allowed)
    if extra:
        raise ValueError(f"unexpected parameters {sorted(extra)} for weight kind {kind!r}")


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    witness: tuple | None = None
    reason: str = ""

    def __bool__(self):
        return self.ok


_RTOL = 1e-12


def _le(a, b):
    """a <= b, exact for Fractions and with a relative slack for floats."""
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a <= b
    return a <= b * (1 + _RTOL) + 1e-300


def _vals(U: WeightFunction, n_max: int):
    if U.is_rational:
        return [U.exact(n) for n in range(n_max + 1)]
    return [U.value(n) for n in range(n_max + 1)]


def check_m_good(U: WeightFunction, M: int, n_max: int) -> CheckResult:
    """Is ``U(n) <= (M/n) U(n-1)`` for ``1 <= n <= n_max``?  Witness is the first violating n."""
    if M < 1 or n_max < 1:
        raise ValueError("M and n_max must be >= 1")
    vals = _vals(U, n_max)
    exact = U.is_rational
    for n in range(1, n_max + 1):
        bound = Fraction(M, n) * vals[n - 1] if exact else M / n * vals[n - 1]
        if not _le(vals[n], bound):
            return CheckResult(False, (n,), f"U({n}) > ({M}/{n}) U({n - 1})")
    return CheckResult(True)


def check_nice(U: WeightFunction, M: int, n_max: int) -> CheckResult:
    """M-good, bounded by ``U(0)`` and submultiplicative on the grid ``n + n' <= n_max``."""
    good = check_m_good(U, M, n_max)
    if not good:
        return good
    vals = _vals(U, n_max)
    for n in range(1, n_max + 1):
        if not _le(vals[n], vals[0]):
            return CheckResult(False, (n,), f"U({n}) > U(0)")
    for n in range(1, n_max + 1):
        for n2 in range(n, n_max + 1 - n):
            if not _le(vals[n + n2], vals[n] * vals[n2]):
                return CheckResult(False, (n, n2), f"U({n}+{n2}) > U({n}) U({n2})")
    return CheckResult(True)
