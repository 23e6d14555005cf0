"""Reference solver for validation: classical RK4 plus bisection shooting on the slope.

Nothing in the Picard code paths imports this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .problem import SystemSpec, Unknown, derived_inits

__all__ = ["Trajectory", "OracleDivergence", "BracketError", "integrate_ivp", "shooting_solve"]


class OracleDivergence(ArithmeticError):
    def __init__(self, message: str, t: float, last_y: float):
        self.t = t
        self.last_y = last_y
        super().__init__(message)


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    values: np.ndarray  # shape (len(times), n_states)

    @property
    def y(self) -> np.ndarray:
        return self.values[:, 0]

    def at_end(self) -> np.ndarray:
        return self.values[-1]


_TEMPLATE = """
def _run(t0, h, nsteps, state, record, isfinite=_isfinite):
    {unpack} = state
    out = [({names},)] if record else None
    for i in range(nsteps):
        t = t0 + i * h
{stages}
        if not ({finite_check}):
            return False, out, i + 1, ({names},)
        if record:
            out.append(({names},))
    return True, out, nsteps, ({names},)
"""


def _stage(rhs_src, names, suffix, t_expr, shifted):
    """Code for one RK stage evaluated at ``t_expr`` with states ``shifted``."""
    lines = []
    env = ", ".join(shifted)
    lines.append(f"        t_, {', '.join(f'_{n}' for n in names)} = {t_expr}, {env}")
    for i, src in enumerate(rhs_src):
        lines.append(f"        k{suffix}_{i} = {src}")
    return lines


@lru_cache(maxsize=64)
def _compile(rhs_sources: tuple[str, ...]):
    n = len(rhs_sources)
    names = [f"x{i}" for i in range(n)]
    # sources are written over t_, _x0, _x1, ...
    lines = []
    lines += _stage(rhs_sources, names, 1, "t", names)
    lines += _stage(rhs_sources, names, 2, "t + 0.5 * h", [f"{x} + 0.5 * h * k1_{i}" for i, x in enumerate(names)])
    lines += _stage(rhs_sources, names, 3, "t + 0.5 * h", [f"{x} + 0.5 * h * k2_{i}" for i, x in enumerate(names)])
    lines += _stage(rhs_sources, names, 4, "t + h", [f"{x} + h * k3_{i}" for i, x in enumerate(names)])
    for i, x in enumerate(names):
        lines.append(f"        {x} = {x} + h / 6.0 * (k1_{i} + 2.0 * k2_{i} + 2.0 * k3_{i} + k4_{i})")
    src = _TEMPLATE.format(
        unpack=", ".join(names) + ("," if n == 1 else ""),
        names=", ".join(names),
        stages="\n".join(lines),
        finite_check=" and ".join(f"isfinite({x}) and abs({x}) < 1e150" for x in names),
    )
    namespace = {"_isfinite": math.isfinite}
    exec(compile(src, "<rk4>", "exec"), namespace)
    return namespace["_run"]


def _rhs_sources(spec: SystemSpec) -> tuple[str, ...]:
    names = ["t_"] + [f"_x{i}" for i in range(spec.n_states)]
    return tuple(r.to_source(names) for r in spec.rhs)


def _steps(spec: SystemSpec, step: float | None) -> tuple[int, float]:
    width = spec.b - spec.a
    if step is None:
        step = 1e-4 * width
    if step <= 0:
        raise ValueError("step must be positive")
    nsteps = max(1, int(round(width / step)))
    return nsteps, width / nsteps


def integrate_ivp(
    spec: SystemSpec, alpha: float, gamma: float, step: float | None = None, record: bool = True
) -> Trajectory:
    """Fixed-step RK4 over ``[a, b]`` from ``y(a) = alpha``, ``y'(a) = gamma``.

    ``step`` defaults to ``1e-4 (b - a)`` and is adjusted to divide the interval.
    """
    run = _compile(_rhs_sources(spec))
    nsteps, h = _steps(spec, step)
    x0 = tuple(derived_inits(spec, alpha, gamma))
    ok, out, done, last = run(spec.a, h, nsteps, x0, record)
    if not ok:
        t_fail = spec.a + done * h
        raise OracleDivergence(f"oracle diverged at t = {t_fail:.6g}", t_fail, last[0])
    if not record:
        return Trajectory(np.array([spec.b]), np.asarray([last], dtype=float))
    times = spec.a + h * np.arange(nsteps + 1)
    times[-1] = spec.b
    return Trajectory(times, np.asarray(out, dtype=float))


def _start(spec: SystemSpec, unknown: float) -> tuple[float, float]:
    if spec.unknown is Unknown.SLOPE:
        return spec.known_left, unknown
    return unknown, spec.known_left


def _residual(spec: SystemSpec, unknown: float, step) -> float:
    try:
        end = integrate_ivp(spec, *_start(spec, unknown), step, record=False).at_end()
        return float(end[0] - spec.beta)
    except OracleDivergence as err:
        # blow-up direction decides the sign
        return math.copysign(math.inf, err.last_y) if math.isfinite(err.last_y) else math.inf


def shooting_solve(
    spec: SystemSpec,
    gamma_lo: float,
    gamma_hi: float,
    tol: float = 1e-10,
    step: float | None = None,
    max_bisections: int = 200,
) -> tuple[float, Trajectory]:
    """Bisect on the slope until ``|y(b; gamma) - beta| < tol``.

    In left-value mode the bracket is on ``y(a)`` instead.

    Raises
    ------
    BracketError
        If the residual has the same sign at both bracket ends.
    """
    r_lo = _residual(spec, gamma_lo, step)
    r_hi = _residual(spec, gamma_hi, step)
    if abs(r_lo) < tol:
        return gamma_lo, integrate_ivp(spec, *_start(spec, gamma_lo), step)
    if abs(r_hi) < tol:
        return gamma_hi, integrate_ivp(spec, *_start(spec, gamma_hi), step)
    if math.copysign(1.0, r_lo) == math.copysign(1.0, r_hi):
        raise BracketError(
            f"no sign change on [{gamma_lo}, {gamma_hi}]: residuals {r_lo:.3g}, {r_hi:.3g}"
        )
    lo, hi = gamma_lo, gamma_hi
    mid = 0.5 * (lo + hi)
    for _ in range(max_bisections):
        mid = 0.5 * (lo + hi)
        r = _residual(spec, mid, step)
        if abs(r) < tol or mid in (lo, hi):
            break
        if math.copysign(1.0, r) == math.copysign(1.0, r_lo):
            lo, r_lo = mid, r
        else:
            hi = mid
    return mid, integrate_ivp(spec, *_start(spec, mid), step)
