"""Single-interval Picard iteration for two-point boundary value problems.

Each step re-estimates the unknown initial value from the integral identity

    gamma = (beta - alpha - int_a^b (b - s) f(s, y(s), u(s)) ds) / (b - a)

(or the analogous expression for ``alpha`` when the slope is prescribed), then
rebuilds every state polynomial from the previous iterate only.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .polynomial import Polynomial, antiderivative, compose_system, evaluate, truncate, weighted_integral
from .problem import SystemSpec, Unknown, derived_inits, validate

__all__ = [
    "TruncationMode",
    "SolveOptions",
    "IterationState",
    "Solution",
    "DivergenceError",
    "initialize",
    "gamma_update",
    "alpha_update",
    "picard_step",
    "solve",
    "ivp_iterates",
]

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12


class TruncationMode(enum.Enum):
    FULL = "full"
    PREFIX = "prefix"


class DivergenceError(ArithmeticError):
    def __init__(self, message: str, iteration: int, segment: int | None = None):
        self.iteration = iteration
        self.segment = segment
        super().__init__(message)


@dataclass(frozen=True)
class SolveOptions:
    """Stopping and degree policy.

    Zero tolerances are allowed and mean "run exactly ``max_iterations``
    steps", which is how fixed-count tables are reproduced.
    """

    max_iterations: int = 25
    gamma_tol: float = 1e-10
    state_tol: float = 1e-10
    degree_cap: int = 64
    samples: int = 201
    truncation_mode: TruncationMode = TruncationMode.FULL

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.gamma_tol < 0 or self.state_tol < 0:
            raise ValueError("tolerances must be non-negative")
        if self.degree_cap < 2:
            raise ValueError("degree_cap must be at least 2")
        if self.samples < 2:
            raise ValueError("samples must be at least 2")


@dataclass(frozen=True)
class IterationState:
    k: int
    unknown_value: float
    states: tuple[Polynomial, ...]
    right_residual: float
    unknown_delta: float = float("inf")
    state_delta: float = float("inf")
    alpha: float = 0.0
    gamma: float = 0.0

    @property
    def y(self) -> Polynomial:
        return self.states[0]

    @property
    def u(self) -> Polynomial:
        return self.states[1]


@dataclass(frozen=True)
class Solution:
    final_states: tuple[Polynomial, ...]
    unknown_trace: list[float]
    residual_trace: list[float]
    converged: bool
    iterations_used: int
    state_deltas: list[float] = field(default_factory=list)
    iterates: list[IterationState] = field(default_factory=list)
    unknown: Unknown = Unknown.SLOPE

    @property
    def y(self) -> Polynomial:
        return self.final_states[0]


def _constant_states(spec: SystemSpec, alpha: float, gamma: float, t0: float) -> tuple[Polynomial, ...]:
    values = derived_inits(spec, alpha, gamma, t0)
    return tuple(Polynomial.constant(v, t0) for v in values)


def initialize(spec: SystemSpec) -> IterationState:
    """Iterate 0: constant states on the straight line through the boundary data.

    In slope mode ``y = alpha`` and ``u = (beta - alpha)/(b - a)``. In
    left-value mode ``u = gamma`` and ``y = beta - gamma (b - a)``, the left
    value of the line with the prescribed slope.
    """
    h = spec.b - spec.a
    if spec.unknown is Unknown.SLOPE:
        alpha = spec.known_left
        gamma = (spec.beta - alpha) / h
        unknown = gamma
    else:
        gamma = spec.known_left
        alpha = spec.beta - gamma * h
        unknown = alpha
    states = _constant_states(spec, alpha, gamma, spec.a)
    return IterationState(
        k=0,
        unknown_value=unknown,
        states=states,
        right_residual=abs(alpha - spec.beta),
        alpha=alpha,
        gamma=gamma,
    )


def _forcing(spec: SystemSpec, state: IterationState, opts: SolveOptions) -> list[Polynomial]:
    return [compose_system(r, state.states, opts.degree_cap) for r in spec.rhs]


def gamma_update(spec: SystemSpec, state: IterationState, opts: SolveOptions | None = None) -> float:
    opts = opts or SolveOptions()
    f = compose_system(spec.f, state.states, opts.degree_cap)
    return _gamma_from(spec, state.alpha, f)


def _gamma_from(spec: SystemSpec, alpha: float, f: Polynomial) -> float:
    return (spec.beta - alpha - weighted_integral(f, spec.a, spec.b)) / (spec.b - spec.a)


def alpha_update(spec: SystemSpec, state: IterationState, opts: SolveOptions | None = None) -> float:
    opts = opts or SolveOptions()
    f = compose_system(spec.f, state.states, opts.degree_cap)
    return _alpha_from(spec, state.gamma, f)


def _alpha_from(spec: SystemSpec, gamma: float, f: Polynomial) -> float:
    return spec.beta - gamma * (spec.b - spec.a) - weighted_integral(f, spec.a, spec.b)


def _degree_limit(opts: SolveOptions, k: int) -> int:
    if opts.truncation_mode is TruncationMode.PREFIX:
        return min(opts.degree_cap, k + 1)
    return opts.degree_cap


def _sampled_change(old, new, grid) -> float:
    return max(float(np.max(np.abs(evaluate(p, grid) - evaluate(q, grid)))) for p, q in zip(old, new))


def _check_finite(states, grid, k: int, segment: int | None = None) -> None:
    for p in states:
        if not p.is_finite():
            raise DivergenceError(f"non-finite coefficient at iteration {k}", k, segment)
        if np.max(np.abs(evaluate(p, grid))) > DIVERGENCE_LIMIT:
            raise DivergenceError(f"iterate exceeded {DIVERGENCE_LIMIT:g} at iteration {k}", k, segment)


def picard_step(spec: SystemSpec, state: IterationState, opts: SolveOptions | None = None) -> IterationState:
    """One Jacobi-style sweep: every new quantity reads only iterate ``k``."""
    opts = opts or SolveOptions()
    k = state.k + 1
    forcing = _forcing(spec, state, opts)
    if spec.unknown is Unknown.SLOPE:
        alpha = state.alpha
        gamma = _gamma_from(spec, alpha, forcing[1])
        unknown = gamma
    else:
        gamma = state.gamma
        alpha = _alpha_from(spec, gamma, forcing[1])
        unknown = alpha
    inits = derived_inits(spec, alpha, gamma)
    limit = _degree_limit(opts, k)
    try:
        states = tuple(
            truncate(antiderivative(f, spec.a) + v0, limit) for f, v0 in zip(forcing, inits)
        )
    except FloatingPointError as err:
        raise DivergenceError(f"{err} at iteration {k}", k) from None
    grid = np.linspace(spec.a, spec.b, opts.samples)
    _check_finite(states, grid, k)
    return IterationState(
        k=k,
        unknown_value=unknown,
        states=states,
        right_residual=abs(evaluate(states[0], spec.b) - spec.beta),
        unknown_delta=abs(unknown - state.unknown_value),
        state_delta=_sampled_change(state.states, states, grid),
        alpha=alpha,
        gamma=gamma,
    )


def solve(spec: SystemSpec, opts: SolveOptions | None = None) -> Solution:
    """Iterate until both the unknown and the sampled states stop moving.

    Raises
    ------
    ValueError
        If ``spec`` fails validation.
    DivergenceError
        If an iterate becomes non-finite or exceeds ``1e12`` on the grid.
    """
    opts = opts or SolveOptions()
    issues = validate(spec)
    if issues:
        raise ValueError("invalid system: " + "; ".join(issues))
    state = initialize(spec)
    iterates = []
    converged = False
    for _ in range(opts.max_iterations):
        state = picard_step(spec, state, opts)
        iterates.append(state)
        log.debug("k=%d unknown=%.12g delta=%.3g", state.k, state.unknown_value, state.state_delta)
        if state.unknown_delta < opts.gamma_tol and state.state_delta < opts.state_tol:
            converged = True
            break
    return Solution(
        final_states=state.states,
        unknown_trace=[s.unknown_value for s in iterates],
        residual_trace=[s.right_residual for s in iterates],
        converged=converged,
        iterations_used=len(iterates),
        state_deltas=[s.state_delta for s in iterates],
        iterates=iterates,
        unknown=spec.unknown,
    )


def ivp_iterates(
    spec: SystemSpec, alpha: float, gamma: float, k: int, degree_cap: int | None = None
) -> list[tuple[Polynomial, ...]]:
    """Plain Picard iterates 0..k of the initial value problem with both initial values fixed."""
    states = _constant_states(spec, alpha, gamma, spec.a)
    inits = derived_inits(spec, alpha, gamma)
    out = [states]
    for _ in range(k):
        forcing = [compose_system(r, states, degree_cap) for r in spec.rhs]
        states = tuple(antiderivative(f, spec.a) + v0 for f, v0 in zip(forcing, inits))
        out.append(states)
    return out
