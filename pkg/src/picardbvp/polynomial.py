"""Dense polynomials in a shifted monomial basis, plus multivariate right-hand sides.

Every quadrature the solvers need is a polynomial antiderivative, so all
integrals below are closed form up to floating point rounding.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "BasepointMismatch",
    "Polynomial",
    "MultiPoly",
    "add",
    "mul",
    "antiderivative",
    "definite_integral",
    "weighted_integral",
    "evaluate",
    "truncate",
    "compose_system",
    "sup_norm_estimate",
]


class BasepointMismatch(ValueError):
    """Two polynomials expanded about different points were combined."""


def _canonical(coeffs: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(coeffs)
    if nz.size == 0:
        out = np.zeros(1)
    else:
        out = np.array(coeffs[: nz[-1] + 1], dtype=float)
    out.flags.writeable = False
    return out


class Polynomial:
    """Real polynomial ``sum(coeffs[i] * (t - basepoint)**i)``.

    Instances are immutable. Trailing coefficients that are exactly zero are
    trimmed; nothing is snapped to zero by tolerance.
    """

    __slots__ = ("_coeffs", "_basepoint")

    def __init__(self, coeffs: Iterable[float] | float = (0.0,), basepoint: float = 0.0):
        arr = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if arr.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")
        if arr.size == 0:
            arr = np.zeros(1)
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError("polynomial coefficients must be finite")
        self._coeffs = _canonical(arr)
        self._basepoint = float(basepoint)

    @classmethod
    def _raw(cls, coeffs: np.ndarray, basepoint: float) -> Polynomial:
        # internal constructor: skips the finiteness scan (callers check when needed)
        obj = cls.__new__(cls)
        obj._coeffs = _canonical(coeffs)
        obj._basepoint = basepoint
        return obj

    @classmethod
    def constant(cls, value: float, basepoint: float = 0.0) -> Polynomial:
        return cls([value], basepoint)

    @classmethod
    def identity(cls, basepoint: float = 0.0) -> Polynomial:
        """The polynomial ``t`` written as ``c + (t - c)``."""
        return cls([basepoint, 1.0], basepoint)

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def basepoint(self) -> float:
        return self._basepoint

    @property
    def degree(self) -> int:
        return len(self._coeffs) - 1

    def is_zero(self) -> bool:
        return len(self._coeffs) == 1 and self._coeffs[0] == 0.0

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self._coeffs)))

    def _check(self, other: Polynomial) -> None:
        if self._basepoint != other._basepoint:
            raise BasepointMismatch(
                f"basepoints differ: {self._basepoint!r} vs {other._basepoint!r}"
            )

    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(float(other), self._basepoint)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        p, q = self._coeffs, other._coeffs
        if len(p) < len(q):
            p, q = q, p
        out = p.copy()
        out[: len(q)] += q
        return Polynomial._raw(out, self._basepoint)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial._raw(-self._coeffs, self._basepoint)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial._raw(self._coeffs * float(other), self._basepoint)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Polynomial._raw(np.convolve(self._coeffs, other._coeffs), self._basepoint)

    __rmul__ = __mul__

    def multiply(self, other: Polynomial, cap: int | None = None) -> Polynomial:
        """Product, optionally dropping every term above degree ``cap``."""
        self._check(other)
        p, q = self._coeffs, other._coeffs
        if cap is not None:
            p, q = p[: cap + 1], q[: cap + 1]
        prod = np.convolve(p, q)
        if cap is not None:
            prod = prod[: cap + 1]
        return Polynomial._raw(prod, self._basepoint)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._basepoint == other._basepoint and np.array_equal(self._coeffs, other._coeffs)

    def __hash__(self) -> int:
        return hash((self._basepoint, self._coeffs.tobytes()))

    def __call__(self, t):
        return evaluate(self, t)

    def __repr__(self) -> str:
        return f"Polynomial({self._coeffs.tolist()!r}, basepoint={self._basepoint!r})"

    def derivative(self) -> Polynomial:
        c = self._coeffs
        if len(c) == 1:
            return Polynomial.constant(0.0, self._basepoint)
        return Polynomial._raw(c[1:] * np.arange(1, len(c)), self._basepoint)

    def truncate(self, maxdeg: int) -> Polynomial:
        return truncate(self, maxdeg)


def add(p: Polynomial, q: Polynomial) -> Polynomial:
    return p + q


def mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return p * q


def evaluate(p: Polynomial, t):
    """Horner evaluation in the shifted variable; accepts scalars or arrays."""
    x = np.asarray(t, dtype=float) - p.basepoint
    c = p.coeffs
    acc = np.full_like(x, c[-1])
    for coef in c[-2::-1]:
        acc = acc * x + coef
    return float(acc) if acc.ndim == 0 else acc


def antiderivative(p: Polynomial, lower: float) -> Polynomial:
    """The antiderivative ``P`` of ``p`` with ``P(lower) = 0``."""
    c = p.coeffs
    out = np.empty(len(c) + 1)
    out[1:] = c / np.arange(1, len(c) + 1)
    out[0] = 0.0
    prim = Polynomial._raw(out, p.basepoint)
    if lower != p.basepoint:
        out = prim.coeffs.copy()
        out[0] = -evaluate(prim, lower)
        prim = Polynomial._raw(out, p.basepoint)
    if not prim.is_finite():
        raise FloatingPointError("antiderivative overflowed")
    return prim


def definite_integral(p: Polynomial, a: float, b: float) -> float:
    prim = antiderivative(p, p.basepoint)
    return evaluate(prim, b) - evaluate(prim, a)


def weighted_integral(p: Polynomial, a: float, b: float) -> float:
    """``integral_a^b (b - s) p(s) ds`` via one multiply and one quadrature."""
    kernel = Polynomial._raw(np.array([b - p.basepoint, -1.0]), p.basepoint)
    return definite_integral(kernel * p, a, b)


def truncate(p: Polynomial, maxdeg: int) -> Polynomial:
    if maxdeg < 0:
        raise ValueError("maxdeg must be non-negative")
    if p.degree <= maxdeg:
        return p
    return Polynomial._raw(p.coeffs[: maxdeg + 1], p.basepoint)


def sup_norm_estimate(p: Polynomial, a: float, b: float, samples: int = 201) -> float:
    """Max of ``|p|`` on a uniform grid including both ends.

    This is a lower bound on the true sup norm.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    grid = np.linspace(a, b, samples)
    return float(np.max(np.abs(evaluate(p, grid))))


Exponents = tuple[int, ...]


class MultiPoly:
    """Polynomial in variables ``(t, x1, ..., xm)``; variable 0 is always ``t``.

    Stored as a mapping from exponent tuples to nonzero coefficients.
    """

    __slots__ = ("_arity", "_terms")

    def __init__(self, arity: int, terms: Mapping[Sequence[int], float] | None = None):
        if arity < 1:
            raise ValueError("arity must be positive")
        self._arity = arity
        clean: dict[Exponents, float] = {}
        for exps, coef in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != arity:
                raise ValueError(f"exponent vector {exps} does not have length {arity}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            coef = float(coef)
            if not math.isfinite(coef):
                raise ValueError("MultiPoly coefficients must be finite")
            total = clean.get(exps, 0.0) + coef
            if total == 0.0:
                clean.pop(exps, None)
            else:
                clean[exps] = total
        self._terms = clean

    @classmethod
    def constant(cls, arity: int, value: float) -> MultiPoly:
        return cls(arity, {(0,) * arity: value})

    @classmethod
    def variable(cls, arity: int, index: int) -> MultiPoly:
        if not 0 <= index < arity:
            raise IndexError(f"variable {index} out of range for arity {arity}")
        exps = [0] * arity
        exps[index] = 1
        return cls(arity, {tuple(exps): 1.0})

    @property
    def arity(self) -> int:
        return self._arity

    @property
    def terms(self) -> dict[Exponents, float]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def depends_on(self, index: int) -> bool:
        return any(exps[index] for exps in self._terms)

    def total_degree(self) -> int:
        return max((sum(e) for e in self._terms), default=0)

    def _other(self, other) -> MultiPoly:
        if isinstance(other, MultiPoly):
            if other._arity != self._arity:
                raise ValueError("MultiPoly arity mismatch")
            return other
        if isinstance(other, (int, float)):
            return MultiPoly.constant(self._arity, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._other(other)
        if other is NotImplemented:
            return other
        merged = dict(self._terms)
        for exps, coef in other._terms.items():
            merged[exps] = merged.get(exps, 0.0) + coef
        return MultiPoly(self._arity, merged)

    __radd__ = __add__

    def __neg__(self) -> MultiPoly:
        return MultiPoly(self._arity, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._other(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._other(other)
        if other is NotImplemented:
            return other
        out: dict[Exponents, float] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                key = tuple(i + j for i, j in zip(e1, e2))
                out[key] = out.get(key, 0.0) + c1 * c2
        return MultiPoly(self._arity, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> MultiPoly:
        if not isinstance(n, int) or n < 0:
            raise ValueError("MultiPoly powers must be non-negative integers")
        result = MultiPoly.constant(self._arity, 1.0)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self._arity == other._arity and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self._arity, frozenset(self._terms.items())))

    def __repr__(self) -> str:
        return f"MultiPoly({self._arity}, {self._terms!r})"

    def partial(self, index: int) -> MultiPoly:
        out: dict[Exponents, float] = {}
        for exps, coef in self._terms.items():
            e = exps[index]
            if e:
                key = exps[:index] + (e - 1,) + exps[index + 1 :]
                out[key] = out.get(key, 0.0) + coef * e
        return MultiPoly(self._arity, out)

    def extend(self, arity: int) -> MultiPoly:
        """Same polynomial viewed in a larger variable set (new variables appended)."""
        if arity < self._arity:
            raise ValueError("cannot shrink arity")
        pad = (0,) * (arity - self._arity)
        return MultiPoly(arity, {e + pad: c for e, c in self._terms.items()})

    def __call__(self, *values):
        """Evaluate at ``(t, x1, ..., xm)``; arguments may be numpy arrays."""
        if len(values) != self._arity:
            raise ValueError(f"expected {self._arity} values, got {len(values)}")
        total = 0.0
        for exps, coef in self._terms.items():
            term = coef
            for v, e in zip(values, exps):
                if e:
                    term = term * v**e
            total = total + term
        return total

    def to_source(self, names: Sequence[str]) -> str:
        """A Python expression string for this polynomial over ``names``."""
        if len(names) != self._arity:
            raise ValueError("wrong number of variable names")
        parts = []
        for exps, coef in sorted(self._terms.items()):
            factors = [repr(coef)]
            for name, e in zip(names, exps):
                factors.extend([name] * e)
            parts.append("*".join(factors))
        return " + ".join(parts) if parts else "0.0"


def compose_system(
    f: MultiPoly, states: Sequence[Polynomial], degree_cap: int | None = None
) -> Polynomial:
    """Substitute univariate ``states`` into ``f``, with ``t`` itself for variable 0.

    With ``degree_cap`` set, every intermediate product is truncated, which
    keeps high-degree terms from growing between iterations.
    """
    if len(states) != f.arity - 1:
        raise ValueError(f"expected {f.arity - 1} state polynomials, got {len(states)}")
    if not states:
        raise ValueError("at least one state is required to fix the basepoint")
    c = states[0].basepoint
    for s in states:
        if s.basepoint != c:
            raise BasepointMismatch("state polynomials must share one basepoint")

    variables = [Polynomial.identity(c), *states]
    powers: list[dict[int, Polynomial]] = [{1: v} for v in variables]

    def power(i: int, e: int) -> Polynomial:
        cache = powers[i]
        if e not in cache:
            half = power(i, e // 2)
            sq = half.multiply(half, degree_cap)
            cache[e] = sq if e % 2 == 0 else sq.multiply(variables[i], degree_cap)
        return cache[e]

    acc = np.zeros(1)
    for exps, coef in f.terms.items():
        term: Polynomial | None = None
        for i, e in enumerate(exps):
            if e:
                p = power(i, e)
                term = p if term is None else term.multiply(p, degree_cap)
        tc = np.array([coef]) if term is None else coef * term.coeffs
        if len(tc) > len(acc):
            tc, acc = acc, tc
        acc = acc.copy()
        acc[: len(tc)] += tc
    result = Polynomial._raw(acc, c)
    if degree_cap is not None:
        result = truncate(result, degree_cap)
    return result
