"""Picard iteration over ``n`` equal subintervals with coupled node unknowns.

Every segment ``j`` carries its left value ``beta_{j-1}`` and left slope
``gamma_j``. One iteration, in this order:

1. rebuild each segment's states from its own previous data;
2. recompute ``I_j = int f_j`` and ``J_j = int (t_j - s) f_j`` from the new states;
3. ``beta_1`` from the closed-form elimination over all segments;
4. ``gamma_1 = (beta_1 - alpha - J_1)/h`` then ``gamma_j = gamma_{j-1} + I_{j-1}``;
5. ``beta_{j-1} = beta_j - h gamma_j - J_j`` for ``j = n, ..., 3``.

``beta_0 = alpha`` and ``beta_n = beta`` never change.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import picard
from .picard import DivergenceError, SolveOptions, _check_finite, _sampled_change
from .polynomial import (
    Polynomial,
    antiderivative,
    compose_system,
    definite_integral,
    evaluate,
    truncate,
    weighted_integral,
)
from .problem import SystemSpec, Unknown, derived_inits, validate

__all__ = [
    "Partition",
    "SegmentState",
    "MultiSolution",
    "NodeContinuity",
    "make_partition",
    "init_multi",
    "segment_update",
    "beta1_update",
    "gamma_sweep",
    "beta_sweep",
    "multi_step",
    "solve_multi",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Partition:
    n: int
    h: float
    nodes: tuple[float, ...]


def make_partition(a: float, b: float, n: int) -> Partition:
    if n < 1:
        raise ValueError("need at least one subinterval")
    if not a < b:
        raise ValueError("need a < b")
    h = (b - a) / n
    nodes = [a + j * h for j in range(n)] + [b]
    return Partition(n=n, h=h, nodes=tuple(nodes))


@dataclass(frozen=True)
class SegmentState:
    j: int  # 1-based
    beta_left: float
    gamma: float
    states: tuple[Polynomial, ...]
    I: float = 0.0
    J: float = 0.0

    @property
    def y(self) -> Polynomial:
        return self.states[0]

    @property
    def u(self) -> Polynomial:
        return self.states[1]


@dataclass(frozen=True)
class NodeContinuity:
    node: int
    t: float
    value_jump: float  # |y_j(t_j) - beta_j|
    slope_jump: float  # |u_j(t_j) - gamma_{j+1}|, 0 at the right end


@dataclass(frozen=True)
class MultiSolution:
    partition: Partition
    segments: tuple[SegmentState, ...]
    continuity_report: tuple[NodeContinuity, ...]
    converged: bool
    iterations_used: int
    deltas: list[float] = field(default_factory=list)
    history: list[tuple[SegmentState, ...]] = field(default_factory=list)

    def evaluate(self, t):
        """Concatenated solution ``y`` at ``t`` (scalar or array)."""
        t = np.asarray(t, dtype=float)
        nodes = np.asarray(self.partition.nodes)
        idx = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, self.partition.n - 1)
        out = np.empty_like(t)
        for j, seg in enumerate(self.segments):
            mask = idx == j
            if np.any(mask):
                out[mask] = evaluate(seg.y, t[mask])
        return float(out) if out.ndim == 0 else out

    @property
    def gammas(self) -> list[float]:
        return [s.gamma for s in self.segments]

    @property
    def betas(self) -> list[float]:
        """Interior node values beta_1..beta_{n-1}."""
        return [s.beta_left for s in self.segments[1:]]


def _integrals(spec: SystemSpec, states, left: float, right: float, cap: int) -> tuple[float, float]:
    f = compose_system(spec.f, states, cap)
    return definite_integral(f, left, right), weighted_integral(f, left, right)


def init_multi(spec: SystemSpec, n: int, opts: SolveOptions | None = None) -> list[SegmentState]:
    """Linear interpolation for the node values, the mean slope for every gamma."""
    opts = opts or SolveOptions()
    if spec.unknown is not Unknown.SLOPE:
        raise ValueError("multi-interval solving needs a known left value y(a)")
    part = make_partition(spec.a, spec.b, n)
    alpha, beta = spec.known_left, spec.beta
    gamma = (beta - alpha) / (spec.b - spec.a)
    segments = []
    for j in range(1, n + 1):
        left = alpha + ((j - 1) / n) * (beta - alpha)
        t0 = part.nodes[j - 1]
        states = tuple(Polynomial.constant(v, t0) for v in derived_inits(spec, left, gamma, t0))
        I, J = _integrals(spec, states, t0, part.nodes[j], opts.degree_cap)
        segments.append(SegmentState(j=j, beta_left=left, gamma=gamma, states=states, I=I, J=J))
    return segments


def segment_update(
    spec: SystemSpec, seg: SegmentState, partition: Partition, opts: SolveOptions | None = None
) -> SegmentState:
    """New polynomials anchored at the segment's left node; I and J from the new states."""
    opts = opts or SolveOptions()
    t0, t1 = partition.nodes[seg.j - 1], partition.nodes[seg.j]
    forcing = [compose_system(r, seg.states, opts.degree_cap) for r in spec.rhs]
    inits = derived_inits(spec, seg.beta_left, seg.gamma, t0)
    states = tuple(
        truncate(antiderivative(f, t0) + v0, opts.degree_cap) for f, v0 in zip(forcing, inits)
    )
    I, J = _integrals(spec, states, t0, t1, opts.degree_cap)
    return replace(seg, states=states, I=I, J=J)


def beta1_update(segments, spec: SystemSpec, partition: Partition) -> float:
    n, h = partition.n, partition.h
    alpha, beta = spec.known_left, spec.beta
    I = [s.I for s in segments]
    J = [s.J for s in segments]
    tail_J = sum(J[1:])
    weighted_I = sum((n - r) * I[r - 1] for r in range(1, n))
    return (beta + (n - 1) * alpha + (n - 1) * J[0] - tail_J - h * weighted_I) / n


def gamma_sweep(segments, spec: SystemSpec, partition: Partition, beta1: float) -> list[float]:
    """Left-to-right: ``gamma_1`` from ``beta_1``, then accumulate the ``I_j``."""
    gammas = [(beta1 - spec.known_left - segments[0].J) / partition.h]
    for j in range(2, partition.n + 1):
        gammas.append(gammas[-1] + segments[j - 2].I)
    return gammas


def beta_sweep(segments, spec: SystemSpec, partition: Partition, gammas) -> list[float]:
    """Right-to-left for ``j = n..3``; returns ``[beta_2, ..., beta_{n-1}]``."""
    n, h = partition.n, partition.h
    betas = {n: spec.beta}
    for j in range(n, 2, -1):
        betas[j - 1] = betas[j] - h * gammas[j - 1] - segments[j - 1].J
    return [betas[j] for j in range(2, n)]


def multi_step(spec: SystemSpec, segments, partition: Partition, opts: SolveOptions, k: int = 0):
    """One full iteration; returns the new segments and the change metric."""
    updated = []
    for seg in segments:
        try:
            new = segment_update(spec, seg, partition, opts)
        except FloatingPointError as err:
            raise DivergenceError(f"segment {seg.j}: {err}", k, seg.j) from None
        grid = np.linspace(partition.nodes[seg.j - 1], partition.nodes[seg.j], opts.samples)
        _check_finite(new.states, grid, k, seg.j)
        updated.append(new)
    beta1 = beta1_update(updated, spec, partition)
    gammas = gamma_sweep(updated, spec, partition, beta1)
    inner = beta_sweep(updated, spec, partition, gammas)
    lefts = [spec.known_left, beta1, *inner][: partition.n]

    delta = 0.0
    out = []
    for old, new, left, gamma in zip(segments, updated, lefts, gammas):
        grid = np.linspace(partition.nodes[old.j - 1], partition.nodes[old.j], opts.samples)
        delta = max(
            delta,
            _sampled_change(old.states, new.states, grid),
            abs(left - old.beta_left),
            abs(gamma - old.gamma),
        )
        out.append(replace(new, beta_left=left, gamma=gamma))
    if not np.isfinite(delta):
        raise DivergenceError(f"non-finite node values at iteration {k}", k)
    return out, delta


def _continuity(spec: SystemSpec, segments, partition: Partition) -> tuple[NodeContinuity, ...]:
    report = []
    n = partition.n
    for j in range(1, n + 1):
        seg = segments[j - 1]
        t = partition.nodes[j]
        target = spec.beta if j == n else segments[j].beta_left
        slope = 0.0 if j == n else abs(evaluate(seg.u, t) - segments[j].gamma)
        report.append(NodeContinuity(j, t, abs(evaluate(seg.y, t) - target), slope))
    return tuple(report)


def solve_multi(spec: SystemSpec, n: int, opts: SolveOptions | None = None) -> MultiSolution:
    """Iterate the coupled segment recursion to tolerance.

    ``n = 1`` delegates to :func:`picard.solve` and wraps its answer.
    """
    opts = opts or SolveOptions()
    issues = validate(spec)
    if issues:
        raise ValueError("invalid system: " + "; ".join(issues))
    part = make_partition(spec.a, spec.b, n)
    if n == 1:
        return _wrap_single(spec, picard.solve(spec, opts), part)

    tol = min(opts.gamma_tol, opts.state_tol)
    segments = init_multi(spec, n, opts)
    history = []
    deltas = []
    converged = False
    for k in range(1, opts.max_iterations + 1):
        segments, delta = multi_step(spec, segments, part, opts, k)
        history.append(tuple(segments))
        deltas.append(delta)
        log.debug("k=%d delta=%.3g", k, delta)
        if delta < tol:
            converged = True
            break
    return MultiSolution(
        partition=part,
        segments=tuple(segments),
        continuity_report=_continuity(spec, segments, part),
        converged=converged,
        iterations_used=len(history),
        deltas=deltas,
        history=history,
    )


def _wrap_single(spec: SystemSpec, sol: picard.Solution, part: Partition) -> MultiSolution:
    def as_segment(it: picard.IterationState) -> SegmentState:
        I, J = _integrals(spec, it.states, spec.a, spec.b, None)
        return SegmentState(j=1, beta_left=it.alpha, gamma=it.gamma, states=it.states, I=I, J=J)

    history = [(as_segment(it),) for it in sol.iterates]
    segments = history[-1]
    return MultiSolution(
        partition=part,
        segments=segments,
        continuity_report=_continuity(spec, segments, part),
        converged=sol.converged,
        iterations_used=sol.iterations_used,
        deltas=[max(it.state_delta, it.unknown_delta) for it in sol.iterates],
        history=history,
    )
