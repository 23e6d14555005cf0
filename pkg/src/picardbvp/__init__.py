"""Picard iteration for two-point boundary value problems ``y'' = f(t, y, y')``.

Right-hand sides are rewritten as polynomial systems (auxiliary states stand
in for exp, sin, cos, 1/g and ln), so every Picard quadrature is an exact
polynomial antiderivative. The unknown initial slope (or left value) is
re-estimated on every pass.
"""

from .analysis import (
    error_report,
    improvement_threshold,
    maclaurin_prefix_check,
    max_lipschitz,
    min_subintervals,
    theorem1_gate,
    theorem_multi_gate,
)
from .multishoot import MultiSolution, solve_multi
from .oracle import integrate_ivp, shooting_solve
from .picard import DivergenceError, Solution, SolveOptions, TruncationMode, solve
from .polynomial import MultiPoly, Polynomial
from .problem import Boundary, Problem, SystemSpec, Unknown, load_problem, polynomialize

__version__ = "0.1.0"

__all__ = [
    "Boundary",
    "DivergenceError",
    "MultiPoly",
    "MultiSolution",
    "Polynomial",
    "Problem",
    "Solution",
    "SolveOptions",
    "SystemSpec",
    "TruncationMode",
    "Unknown",
    "error_report",
    "improvement_threshold",
    "integrate_ivp",
    "load_problem",
    "maclaurin_prefix_check",
    "max_lipschitz",
    "min_subintervals",
    "polynomialize",
    "shooting_solve",
    "solve",
    "solve_multi",
    "theorem1_gate",
    "theorem_multi_gate",
]
