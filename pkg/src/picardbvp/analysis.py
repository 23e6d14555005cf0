"""Existence/convergence gates, the Maclaurin-prefix check, and error tables."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .picard import Solution, ivp_iterates
from .problem import SystemSpec, Unknown

__all__ = [
    "Regime",
    "GateReport",
    "ErrorRow",
    "ErrorReport",
    "GridMismatch",
    "theorem1_gate",
    "theorem_multi_gate",
    "min_subintervals",
    "max_lipschitz",
    "improvement_threshold",
    "maclaurin_prefix_check",
    "error_report",
]


class Regime(enum.Enum):
    SINGLE_INTERVAL = "single"
    MULTI_H_LE_1 = "multi_h_le_1"
    MULTI_H_GE_1 = "multi_h_ge_1"


@dataclass(frozen=True)
class GateReport:
    passed: bool
    lhs: float
    bound: float
    regime: Regime


def _cubic(n: int) -> int:
    return n**3 + n**2 + n + 2


def theorem1_gate(L: float, a: float, b: float) -> GateReport:
    """Single interval: passes iff ``b - a < 1 / (1 + 1.5 L)`` (strict)."""
    if L < 0:
        raise ValueError("Lipschitz constant must be non-negative")
    if not a < b:
        raise ValueError("need a < b")
    width = b - a
    bound = 1.0 / (1.0 + 1.5 * L)
    return GateReport(width < bound, width, bound, Regime.SINGLE_INTERVAL)


def theorem_multi_gate(L: float, a: float, b: float, n: int) -> GateReport:
    """Equal-width partition into ``n`` pieces.

    With ``h = (b - a)/n <= 1`` the quantity is
    ``[(n^3 + n^2 + n + 2) L + 2] (b - a) / (2n)``; for ``h > 1`` the width
    enters squared and the divisor is ``2 n^2``. Passes iff it is below 1.
    """
    if L < 0:
        raise ValueError("Lipschitz constant must be non-negative")
    if not a < b:
        raise ValueError("need a < b")
    if n < 1:
        raise ValueError("n must be positive")
    width = b - a
    core = _cubic(n) * L + 2.0
    if width / n <= 1.0:
        lhs, regime = core * width / (2 * n), Regime.MULTI_H_LE_1
    else:
        lhs, regime = core * width**2 / (2 * n**2), Regime.MULTI_H_GE_1
    return GateReport(lhs < 1.0, lhs, 1.0, regime)


def min_subintervals(L: float, a: float, b: float, n_max: int = 8) -> int | None:
    """Smallest ``n`` in ``1..n_max`` whose gate passes (``n = 1`` uses the single-interval gate)."""
    if n_max < 1:
        raise ValueError("n_max must be positive")
    if theorem1_gate(L, a, b).passed:
        return 1
    for n in range(2, n_max + 1):
        if theorem_multi_gate(L, a, b, n).passed:
            return n
    return None


def max_lipschitz(a: float, b: float, n: int = 1) -> float:
    """Supremum of the Lipschitz constants the gate for ``n`` accepts.

    A value ``<= 0`` means no Lipschitz constant is covered.
    """
    if not a < b:
        raise ValueError("need a < b")
    width = b - a
    if n == 1:
        return (1.0 / width - 1.0) / 1.5
    if width / n <= 1.0:
        return (2.0 * n / width - 2.0) / _cubic(n)
    return (2.0 * n**2 / width**2 - 2.0) / _cubic(n)


def improvement_threshold(n: int) -> float:
    """Interval width beyond which ``n`` pieces admit a larger Lipschitz constant than one."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return (n**3 + n**2 - 2 * n + 2) / (n**3 + n**2 + n - 1)


@dataclass(frozen=True)
class PrefixCheck:
    ok: bool
    max_deviation: float
    coefficients: tuple[float, ...]

    def __bool__(self) -> bool:
        return self.ok


def maclaurin_prefix_check(
    spec: SystemSpec,
    gamma: float,
    k: int,
    reference_coeffs: Sequence[float],
    tol: float = 1e-10,
    alpha: float | None = None,
) -> PrefixCheck:
    """Compare coefficients ``0..k`` of the ``k``-th fixed-slope iterate with a series.

    Deviation is relative per coefficient (absolute where the reference is 0).
    The system must be expanded about 0 for the coefficients to be Maclaurin ones.
    """
    if len(reference_coeffs) < k + 1:
        raise ValueError("need at least k + 1 reference coefficients")
    if alpha is None:
        if spec.unknown is not Unknown.SLOPE:
            raise ValueError("alpha is required in left-value mode")
        alpha = spec.known_left
    y = ivp_iterates(spec, alpha, gamma, k)[-1][0]
    c = np.zeros(k + 1)
    m = min(len(y.coeffs), k + 1)
    c[:m] = y.coeffs[:m]
    ref = np.asarray(reference_coeffs[: k + 1], dtype=float)
    scale = np.where(ref == 0.0, 1.0, np.abs(ref))
    dev = float(np.max(np.abs(c - ref) / scale))
    return PrefixCheck(dev <= tol, dev, tuple(c))


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ErrorRow:
    k: int
    sup_error: float
    unknown_error: float
    right_residual: float


@dataclass(frozen=True)
class ErrorReport:
    rows: tuple[ErrorRow, ...]
    samples: int


def _reference_on_grid(exact, grid: np.ndarray) -> np.ndarray:
    if callable(exact):
        return np.asarray(exact(grid), dtype=float) * np.ones_like(grid)
    # a Trajectory-like object: must contain the grid as an evenly strided subset
    times = np.asarray(exact.times)
    values = np.asarray(exact.values)
    steps = len(times) - 1
    intervals = len(grid) - 1
    if steps % intervals != 0:
        raise GridMismatch(f"reference has {len(times)} points, not a refinement of {len(grid)}")
    picked = times[:: steps // intervals]
    if not np.allclose(picked, grid, rtol=0, atol=1e-9 * max(1.0, abs(grid[-1] - grid[0]))):
        raise GridMismatch("reference times do not cover the sampling grid")
    return values[:: steps // intervals, 0]


def error_report(
    sol: Solution,
    exact: Callable[[np.ndarray], np.ndarray] | object,
    samples: int = 201,
    a: float | None = None,
    b: float | None = None,
    reference_unknown: float | None = None,
) -> ErrorReport:
    """One row per stored iterate: sampled sup error of ``y`` and error of the unknown.

    ``exact`` is either a callable ``t -> y(t)`` or a trajectory whose times
    refine the ``samples``-point grid on ``[a, b]``.
    """
    if not sol.iterates:
        return ErrorReport((), samples)
    if a is None or b is None:
        if callable(exact):
            raise ValueError("interval [a, b] is required with a callable reference")
        a, b = float(exact.times[0]), float(exact.times[-1])
    grid = np.linspace(a, b, samples)
    ref = _reference_on_grid(exact, grid)
    if reference_unknown is None and not callable(exact):
        first = np.asarray(exact.values)[0]
        reference_unknown = float(first[1] if sol.unknown is Unknown.SLOPE else first[0])
    rows = []
    for it in sol.iterates:
        err = float(np.max(np.abs(it.y(grid) - ref)))
        uerr = abs(it.unknown_value - reference_unknown) if reference_unknown is not None else float("nan")
        rows.append(ErrorRow(it.k, err, uerr, it.right_residual))
    return ErrorReport(tuple(rows), samples)
