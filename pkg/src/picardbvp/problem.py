"""Boundary value problems as first-order polynomial systems.

A problem ``y'' = f(t, y, y')`` on ``[a, b]`` becomes ``y' = u, u' = f`` plus
auxiliary states that absorb every elementary function in ``f``:

=============  ==========================================================
node           auxiliary states and equations
=============  ==========================================================
``exp(g)``     ``v = exp(g)``,  ``v' = v g'``
``sin(g)``     ``v = sin(g), w = cos(g)``, ``v' = w g'``, ``w' = -v g'``
``cos(g)``     the same pair as ``sin(g)``
``1/g``        ``v = 1/g``,  ``v' = -v^2 g'``
``ln(g)``      ``w = 1/g, v = ln(g)``, ``v' = w g'``
=============  ==========================================================

Identical nodes share one state. ``g'`` is the derivative of ``g`` along the
flow, itself a polynomial in the states, so the closure is exact.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .expr import AuxExpr, EvaluationError
from .polynomial import MultiPoly

__all__ = [
    "Unknown",
    "InitCondition",
    "Boundary",
    "SystemSpec",
    "Problem",
    "PolynomializeError",
    "ProblemFileError",
    "polynomialize",
    "derived_inits",
    "validate",
    "estimate_lipschitz",
    "load_problem",
    "problem_from_dict",
]


class Unknown(enum.Enum):
    SLOPE = "slope"  # y(a) known, gamma = u(a) unknown
    LEFT_VALUE = "left_value"  # u(a) known, alpha = y(a) unknown


class PolynomializeError(ValueError):
    pass


class ProblemFileError(ValueError):
    """Malformed problem document; ``line``/``column`` locate it when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


@dataclass(frozen=True)
class InitCondition:
    kind: str  # "known" | "unknown" | "derived"
    value: float | None = None
    expr: AuxExpr | None = None

    @classmethod
    def known(cls, value: float) -> InitCondition:
        return cls("known", float(value))

    @classmethod
    def unknown(cls) -> InitCondition:
        return cls("unknown")

    @classmethod
    def derived(cls, expr: AuxExpr) -> InitCondition:
        return cls("derived", expr=expr)


@dataclass(frozen=True)
class Boundary:
    """``left`` is ``y(a)`` in slope mode and ``y'(a)`` in left-value mode."""

    left: float
    right: float


@dataclass(frozen=True)
class SystemSpec:
    a: float
    b: float
    state_names: tuple[str, ...]
    rhs: tuple[MultiPoly, ...]
    init: tuple[InitCondition, ...]
    beta: float
    unknown: Unknown = Unknown.SLOPE

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def f(self) -> MultiPoly:
        """Right-hand side of ``u' = f``."""
        return self.rhs[1]

    @property
    def known_left(self) -> float:
        """The known initial value: alpha in slope mode, gamma in left-value mode."""
        entry = self.init[0] if self.unknown is Unknown.SLOPE else self.init[1]
        return float(entry.value)

    def variable_names(self) -> tuple[str, ...]:
        return ("t", *self.state_names)


@dataclass(frozen=True)
class Problem:
    """A parsed problem file: the system plus optional reference data."""

    spec: SystemSpec
    source: str = ""
    exact: AuxExpr | None = None
    exact_slope: float | None = None
    name: str = ""
    bracket: tuple[float, float] | None = None  # shooting bracket for the oracle

    def exact_y(self, t):
        if self.exact is None:
            raise ValueError("problem has no exact solution")
        return ex.evaluate(self.exact, {"t": np.asarray(t, dtype=float)})


class _Builder:
    """Assigns auxiliary states to function nodes and converts trees to MultiPoly."""

    def __init__(self):
        self.names = ["y", "u"]
        self.aux: list[tuple[str, AuxExpr]] = []  # (rule, defining node) per aux state
        self.index: dict[AuxExpr, int] = {}

    def collect(self, e: AuxExpr) -> None:
        if isinstance(e, (ex.Const, ex.Var)):
            return
        if isinstance(e, (ex.Add, ex.Sub, ex.Mul)):
            self.collect(e.left)
            self.collect(e.right)
        elif isinstance(e, ex.Neg):
            self.collect(e.arg)
        elif isinstance(e, ex.Pow):
            self.collect(e.base)
        elif isinstance(e, ex.Func):
            self.collect(e.arg)
            self._introduce(e)
        else:
            raise PolynomializeError(f"unsupported node {e!r}")

    def _new_state(self, node: ex.Func, rule: str) -> None:
        if node in self.index:
            return
        self.index[node] = len(self.names)
        self.names.append(ex.to_string(node))
        self.aux.append((rule, node))

    def _introduce(self, node: ex.Func) -> None:
        g = node.arg
        if node.name == "exp":
            self._new_state(node, "exp")
        elif node.name in ("sin", "cos"):
            self._new_state(ex.Func("sin", g), "sin")
            self._new_state(ex.Func("cos", g), "cos")
        elif node.name == "reciprocal":
            self._new_state(node, "reciprocal")
        elif node.name == "ln":
            self._new_state(ex.Func("reciprocal", g), "reciprocal")
            self._new_state(node, "ln")
        else:
            raise PolynomializeError(f"no polynomialization rule for function {node.name!r}")

    def to_poly(self, e: AuxExpr, arity: int) -> MultiPoly:
        if isinstance(e, ex.Const):
            return MultiPoly.constant(arity, e.value)
        if isinstance(e, ex.Var):
            if e.name == "t":
                return MultiPoly.variable(arity, 0)
            if e.name in ("y", "u"):
                return MultiPoly.variable(arity, 1 + ("y", "u").index(e.name))
            if e.name in ex.CONSTANTS:
                return MultiPoly.constant(arity, ex.CONSTANTS[e.name])
            raise PolynomializeError(f"unknown variable {e.name!r} (use t, y, u)")
        if isinstance(e, ex.Add):
            return self.to_poly(e.left, arity) + self.to_poly(e.right, arity)
        if isinstance(e, ex.Sub):
            return self.to_poly(e.left, arity) - self.to_poly(e.right, arity)
        if isinstance(e, ex.Mul):
            return self.to_poly(e.left, arity) * self.to_poly(e.right, arity)
        if isinstance(e, ex.Neg):
            return -self.to_poly(e.arg, arity)
        if isinstance(e, ex.Pow):
            return self.to_poly(e.base, arity) ** e.exponent
        if isinstance(e, ex.Func):
            return MultiPoly.variable(arity, 1 + self.index[e])
        raise PolynomializeError(f"unsupported node {e!r}")


def _flow_derivative(g: MultiPoly, rhs: Sequence[MultiPoly | None]) -> MultiPoly:
    """d/dt of g(t, x(t)) = dg/dt + sum_i dg/dx_i * x_i'."""
    out = g.partial(0)
    for i, r in enumerate(rhs, start=1):
        if g.depends_on(i):
            if r is None:
                raise PolynomializeError("cyclic auxiliary definition")
            out = out + g.partial(i) * r
    return out


def polynomialize(
    a: float,
    b: float,
    rhs_expr: AuxExpr | str,
    boundary: Boundary,
    unknown: Unknown = Unknown.SLOPE,
) -> SystemSpec:
    """Rewrite ``y'' = rhs_expr`` as a polynomial first-order system."""
    if isinstance(rhs_expr, str):
        rhs_expr = ex.parse(rhs_expr)
    builder = _Builder()
    builder.collect(rhs_expr)
    n = len(builder.names)
    arity = n + 1

    rhs: list[MultiPoly | None] = [None] * n
    rhs[0] = MultiPoly.variable(arity, 2)
    rhs[1] = builder.to_poly(rhs_expr, arity)
    for k, (rule, node) in enumerate(builder.aux):
        state = 2 + k
        v = MultiPoly.variable(arity, 1 + state)
        g = builder.to_poly(node.arg, arity)
        dg = _flow_derivative(g, rhs)
        if rule == "exp":
            rhs[state] = v * dg
        elif rule == "sin":
            w = MultiPoly.variable(arity, 1 + builder.index[ex.Func("cos", node.arg)])
            rhs[state] = w * dg
        elif rule == "cos":
            s = MultiPoly.variable(arity, 1 + builder.index[ex.Func("sin", node.arg)])
            rhs[state] = -(s * dg)
        elif rule == "reciprocal":
            rhs[state] = -(v * v * dg)
        elif rule == "ln":
            w = MultiPoly.variable(arity, 1 + builder.index[ex.Func("reciprocal", node.arg)])
            rhs[state] = w * dg

    if unknown is Unknown.SLOPE:
        init = [InitCondition.known(boundary.left), InitCondition.unknown()]
    else:
        init = [InitCondition.unknown(), InitCondition.known(boundary.left)]
    init += [InitCondition.derived(node) for _, node in builder.aux]
    return SystemSpec(
        a=float(a),
        b=float(b),
        state_names=tuple(builder.names),
        rhs=tuple(rhs),
        init=tuple(init),
        beta=float(boundary.right),
        unknown=unknown,
    )


def derived_inits(spec: SystemSpec, alpha: float, gamma: float, t: float | None = None) -> list[float]:
    """Initial values of every state given ``y = alpha``, ``u = gamma`` at ``t`` (default ``a``)."""
    t0 = spec.a if t is None else t
    env = {"t": t0, "y": alpha, "u": gamma}
    values = [float(alpha), float(gamma)]
    for name, cond in zip(spec.state_names[2:], spec.init[2:]):
        if cond.kind == "derived":
            try:
                val = float(ex.evaluate(cond.expr, env))
            except EvaluationError as err:
                raise EvaluationError(f"initial value of state {name!r}: {err}") from err
        elif cond.kind == "known":
            val = float(cond.value)
        else:
            raise EvaluationError(f"auxiliary state {name!r} cannot have an unknown initial value")
        env[name] = val
        values.append(val)
    return values


def validate(spec: SystemSpec) -> list[str]:
    """Diagnostics for broken invariants; an empty list means the system is usable."""
    problems = []
    if not spec.a < spec.b:
        problems.append("empty interval: need a < b")
    n = len(spec.state_names)
    if n < 2:
        problems.append("at least the two states y and u are required")
    if not (len(spec.rhs) == len(spec.init) == n):
        problems.append("rhs, init and state_names must have equal lengths")
        return problems
    arity = n + 1
    for i, r in enumerate(spec.rhs):
        if r.arity != arity:
            problems.append(f"equation {i} has arity {r.arity}, expected {arity}")
    if n >= 2 and spec.rhs[0] != MultiPoly.variable(arity, 2):
        problems.append("first equation must be y' = u")
    unknowns = [i for i, c in enumerate(spec.init) if c.kind == "unknown"]
    expected = 1 if spec.unknown is Unknown.SLOPE else 0
    if unknowns != [expected]:
        which = "u(a)" if expected == 1 else "y(a)"
        problems.append(f"exactly one initial value ({which}) must be unknown")
    for i, c in enumerate(spec.init[:2]):
        if c.kind == "derived":
            problems.append(f"state {spec.state_names[i]!r} cannot have a derived initial value")
    for name, c in zip(spec.state_names[2:], spec.init[2:]):
        if c.kind == "derived":
            free = ex.variables(c.expr) - {"t", "y", "u"} - set(ex.CONSTANTS)
            if free:
                problems.append(f"initial value of {name!r} refers to {sorted(free)}")
    for name, c in zip(spec.state_names, spec.init):
        if c.kind == "known" and not np.isfinite(c.value):
            problems.append(f"initial value of {name!r} is not finite")
    if not np.isfinite(spec.beta):
        problems.append("right boundary value is not finite")
    return problems


def estimate_lipschitz(
    spec: SystemSpec, box: Mapping[str, tuple[float, float]], points: int = 33
) -> float:
    """Grid maximum of ``|df/dy| + |df/du|`` over ``[a, b] x box``.

    ``box`` gives bounds for ``y`` and ``u``. The gradient is exact; only the
    maximization is sampled, on ``points`` nodes per dimension. The right-hand
    side must be a polynomial in ``t, y, u`` alone.
    """
    f = spec.f
    for i in range(3, f.arity):
        if f.depends_on(i):
            raise ValueError(
                "Lipschitz estimation needs f polynomial in t, y, u; "
                f"f depends on auxiliary state {spec.state_names[i - 1]!r}"
            )
    try:
        (ylo, yhi), (ulo, uhi) = box["y"], box["u"]
    except KeyError as err:
        raise ValueError(f"box is missing bounds for {err.args[0]!r}") from None
    t = np.linspace(spec.a, spec.b, points)
    y = np.linspace(ylo, yhi, points)
    u = np.linspace(ulo, uhi, points)
    T, Y, U = np.meshgrid(t, y, u, indexing="ij")
    args = [T, Y, U] + [np.zeros_like(T)] * (f.arity - 3)
    total = np.zeros_like(T)
    for idx in (1, 2):
        d = f.partial(idx)
        total = total + np.abs(np.broadcast_to(d(*args), T.shape))
    return float(np.max(total))


# --- problem files -----------------------------------------------------------


def _multipoly_from_json(obj, names: Sequence[str]) -> MultiPoly:
    arity = len(names)
    terms = {}
    if not isinstance(obj, dict) or "terms" not in obj:
        raise ProblemFileError('each rhs entry must be an object with "terms"')
    for term in obj["terms"]:
        exps = [0] * arity
        for var, power in term.get("powers", {}).items():
            if var not in names:
                raise ProblemFileError(f"unknown variable {var!r} in rhs term")
            if not isinstance(power, int) or power < 0:
                raise ProblemFileError(f"power of {var!r} must be a non-negative integer")
            exps[names.index(var)] += power
        key = tuple(exps)
        terms[key] = terms.get(key, 0.0) + ex.parse_constant(term["coef"])
    return MultiPoly(arity, terms)


def multipoly_to_json(p: MultiPoly, names: Sequence[str]) -> dict:
    return {
        "terms": [
            {"coef": c, "powers": {n: e for n, e in zip(names, exps) if e}}
            for exps, c in sorted(p.terms.items())
        ]
    }


def _init_from_json(entry, names: Sequence[str]) -> InitCondition | None:
    if entry is None:
        return None
    if entry == "unknown":
        return InitCondition.unknown()
    if isinstance(entry, dict):
        if "known" in entry:
            return InitCondition.known(ex.parse_constant(entry["known"]))
        if "derived" in entry:
            node = ex.parse(entry["derived"])
            free = ex.variables(node) - {"t", "y", "u"} - set(ex.CONSTANTS)
            if free:
                raise ProblemFileError(f"derived initial value refers to {sorted(free)}")
            return InitCondition.derived(node)
    raise ProblemFileError(f"cannot read initial condition {entry!r}")


def problem_from_dict(doc: Mapping, name: str = "") -> Problem:
    try:
        a, b = (ex.parse_constant(v) for v in doc["interval"])
        left = doc["boundary"]["left"]
        right = doc["boundary"]["right"]
        equation = doc["equation"]
    except (KeyError, TypeError, ValueError) as err:
        raise ProblemFileError(f"missing or malformed field: {err}") from None
    if right.get("kind", "value") != "value":
        raise ProblemFileError('right boundary kind must be "value"')
    kind = left.get("kind")
    if kind == "value":
        unknown = Unknown.SLOPE
    elif kind == "slope":
        unknown = Unknown.LEFT_VALUE
    else:
        raise ProblemFileError('left boundary kind must be "value" or "slope"')
    boundary = Boundary(ex.parse_constant(left["value"]), ex.parse_constant(right["value"]))

    if "expr" in equation:
        source = equation["expr"]
        spec = polynomialize(a, b, ex.parse(source), boundary, unknown)
    elif "system" in equation:
        spec = _system_from_json(equation["system"], a, b, boundary, unknown)
        source = "system"
    else:
        raise ProblemFileError('equation needs "expr" or "system"')

    issues = validate(spec)
    if issues:
        raise ProblemFileError("; ".join(issues))

    exact = exact_slope = None
    if "exact" in doc:
        exact = ex.parse(doc["exact"]["y"], allow_extra=True)
        if "slope" in doc["exact"]:
            exact_slope = ex.parse_constant(doc["exact"]["slope"])
    bracket = None
    if "bracket" in doc:
        try:
            lo, hi = (ex.parse_constant(v) for v in doc["bracket"])
        except (TypeError, ValueError) as err:
            raise ProblemFileError(f"bracket must be two numbers: {err}") from None
        bracket = (lo, hi)
    return Problem(spec=spec, source=source, exact=exact, exact_slope=exact_slope,
                   name=doc.get("name", name), bracket=bracket)


def _system_from_json(sys_doc, a, b, boundary: Boundary, unknown: Unknown) -> SystemSpec:
    states = list(sys_doc["states"])
    if len(states) < 2:
        raise ProblemFileError("a system needs at least the states y and u")
    names = ["t", *states]
    rhs = tuple(_multipoly_from_json(r, names) for r in sys_doc["rhs"])
    raw_init = sys_doc.get("init", [None] * len(states))
    if len(raw_init) != len(states) or len(rhs) != len(states):
        raise ProblemFileError("states, rhs and init must have equal lengths")
    init = [_init_from_json(e, names) for e in raw_init]
    # y and u default to what the boundary data says
    if unknown is Unknown.SLOPE:
        defaults = [InitCondition.known(boundary.left), InitCondition.unknown()]
    else:
        defaults = [InitCondition.unknown(), InitCondition.known(boundary.left)]
    for i in (0, 1):
        if init[i] is None:
            init[i] = defaults[i]
        elif init[i] != defaults[i]:
            raise ProblemFileError(f"initial condition of {states[i]!r} contradicts the boundary data")
    for i in range(2, len(states)):
        if init[i] is None:
            raise ProblemFileError(f"auxiliary state {states[i]!r} needs an initial condition")
    # derived expressions are written in terms of the first two state names
    rename = {states[0]: "y", states[1]: "u"}
    init = [_rename(c, rename) for c in init]
    return SystemSpec(
        a=a, b=b, state_names=tuple(states), rhs=rhs, init=tuple(init),
        beta=boundary.right, unknown=unknown,
    )


def _rename(cond: InitCondition, mapping: dict[str, str]) -> InitCondition:
    if cond.kind != "derived":
        return cond

    def walk(e):
        if isinstance(e, ex.Var):
            return ex.Var(mapping.get(e.name, e.name))
        if isinstance(e, ex.Const):
            return e
        if isinstance(e, (ex.Add, ex.Sub, ex.Mul)):
            return type(e)(walk(e.left), walk(e.right))
        if isinstance(e, ex.Neg):
            return ex.Neg(walk(e.arg))
        if isinstance(e, ex.Pow):
            return ex.Pow(walk(e.base), e.exponent)
        return ex.Func(e.name, walk(e.arg))

    return InitCondition.derived(walk(cond.expr))


def load_problem(path: str | Path) -> Problem:
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ProblemFileError(f"invalid JSON: {err.msg}", err.lineno, err.colno) from None
    try:
        return problem_from_dict(doc, name=path.stem)
    except ex.ParseError as err:
        line, col = _locate(text, err.text)
        raise ProblemFileError(str(err), line, col + err.column if line else None) from None


def _locate(text: str, needle: str) -> tuple[int | None, int]:
    """Line and column offset of ``needle`` inside the raw document."""
    for lineno, line in enumerate(text.splitlines(), start=1):
        pos = line.find(needle)
        if pos >= 0:
            return lineno, pos
    return None, 0


def system_to_dict(spec: SystemSpec) -> dict:
    """JSON form of a SystemSpec (the ``system`` equation variant)."""
    names = spec.variable_names()
    init = []
    for c in spec.init:
        if c.kind == "unknown":
            init.append("unknown")
        elif c.kind == "known":
            init.append({"known": c.value})
        else:
            init.append({"derived": ex.to_string(c.expr)})
    return {
        "states": list(spec.state_names),
        "rhs": [multipoly_to_json(r, names) for r in spec.rhs],
        "init": init,
    }

