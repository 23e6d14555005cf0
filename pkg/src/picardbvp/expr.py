"""Expression trees for right-hand sides and a small infix parser.

Grammar (usual precedence, no implicit multiplication)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' ['-'] INT)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

``a / b`` becomes ``a * reciprocal(b)`` and ``x^-n`` becomes
``reciprocal(x)^n``, so the tree only ever holds the node kinds below.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

FUNCTIONS = ("exp", "sin", "cos", "reciprocal", "ln")
# accepted in constant contexts (interval ends, boundary values, exact solutions)
EXTRA_FUNCTIONS = ("sqrt", "tan", "log")
CONSTANTS = {"pi": math.pi, "e": math.e}


class ParseError(ValueError):
    def __init__(self, message: str, text: str, column: int):
        self.text = text
        self.column = column
        super().__init__(f"{message} at column {column}: {text!r}")


class EvaluationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Add:
    left: "AuxExpr"
    right: "AuxExpr"


@dataclass(frozen=True)
class Sub:
    left: "AuxExpr"
    right: "AuxExpr"


@dataclass(frozen=True)
class Mul:
    left: "AuxExpr"
    right: "AuxExpr"


@dataclass(frozen=True)
class Neg:
    arg: "AuxExpr"


@dataclass(frozen=True)
class Pow:
    base: "AuxExpr"
    exponent: int


@dataclass(frozen=True)
class Func:
    name: str
    arg: "AuxExpr"


AuxExpr = Union[Const, Var, Add, Sub, Mul, Neg, Pow, Func]


def to_string(e: AuxExpr) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Add):
        return f"({to_string(e.left)} + {to_string(e.right)})"
    if isinstance(e, Sub):
        return f"({to_string(e.left)} - {to_string(e.right)})"
    if isinstance(e, Mul):
        return f"{to_string(e.left)}*{to_string(e.right)}"
    if isinstance(e, Neg):
        return f"-{to_string(e.arg)}"
    if isinstance(e, Pow):
        return f"{to_string(e.base)}^{e.exponent}"
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def variables(e: AuxExpr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Add, Sub, Mul)):
        return variables(e.left) | variables(e.right)
    if isinstance(e, (Neg, Func)):
        return variables(e.arg)
    if isinstance(e, Pow):
        return variables(e.base)
    raise TypeError(f"not an expression node: {e!r}")


def _apply(name: str, x):
    scalar = np.ndim(x) == 0
    arr = np.asarray(x, dtype=float)
    if name == "exp":
        out = np.exp(arr)
    elif name == "sin":
        out = np.sin(arr)
    elif name == "cos":
        out = np.cos(arr)
    elif name == "tan":
        out = np.tan(arr)
    elif name == "reciprocal":
        if np.any(arr == 0.0):
            raise EvaluationError("reciprocal of zero")
        out = 1.0 / arr
    elif name in ("ln", "log"):
        if np.any(arr <= 0.0):
            raise EvaluationError("logarithm of a non-positive number")
        out = np.log(arr)
    elif name == "sqrt":
        if np.any(arr < 0.0):
            raise EvaluationError("square root of a negative number")
        out = np.sqrt(arr)
    else:
        raise EvaluationError(f"unknown function {name!r}")
    return float(out) if scalar else out


def evaluate(e: AuxExpr, env: Mapping[str, float | np.ndarray]):
    """Numeric value of ``e``; ``env`` maps variable names to scalars or arrays."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        if e.name in env:
            return env[e.name]
        if e.name in CONSTANTS:
            return CONSTANTS[e.name]
        raise EvaluationError(f"unbound variable {e.name!r}")
    if isinstance(e, Add):
        return evaluate(e.left, env) + evaluate(e.right, env)
    if isinstance(e, Sub):
        return evaluate(e.left, env) - evaluate(e.right, env)
    if isinstance(e, Mul):
        return evaluate(e.left, env) * evaluate(e.right, env)
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Pow):
        return evaluate(e.base, env) ** e.exponent
    if isinstance(e, Func):
        return _apply(e.name, evaluate(e.arg, env))
    raise TypeError(f"not an expression node: {e!r}")


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ParseError(f"unexpected character {text[col - 1]!r}", text, col)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, functions: tuple[str, ...]):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.functions = functions

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, col = self.take()
        if val != value:
            raise ParseError(f"expected {value!r} but found {val or 'end of input'!r}", self.text, col)

    def fail(self, message: str):
        raise ParseError(message, self.text, self.peek()[2])

    def parse(self) -> AuxExpr:
        node = self.expr()
        kind, val, col = self.peek()
        if kind != "end":
            if kind in ("num", "name") or val == "(":
                raise ParseError("implicit multiplication is not allowed", self.text, col)
            raise ParseError(f"unexpected {val!r}", self.text, col)
        return node

    def expr(self) -> AuxExpr:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> AuxExpr:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            if op == "*":
                node = Mul(node, rhs)
            elif isinstance(rhs, Const):
                if rhs.value == 0.0:
                    self.fail("division by zero")
                node = Mul(node, Const(1.0 / rhs.value))
            else:
                node = Mul(node, Func("reciprocal", rhs))
        return node

    def unary(self) -> AuxExpr:
        op = self.peek()[1]
        if op in ("+", "-"):
            self.take()
            arg = self.unary()
            if op == "+":
                return arg
            if isinstance(arg, Const):
                return Const(-arg.value)
            return Neg(arg)
        return self.power()

    def power(self) -> AuxExpr:
        base = self.atom()
        if self.peek()[1] != "^":
            return base
        self.take()
        sign = 1
        if self.peek()[1] == "-":
            self.take()
            sign = -1
        kind, val, col = self.take()
        if kind != "num" or not val.isdigit():
            raise ParseError("exponent must be an integer literal", self.text, col)
        n = int(val)
        if sign < 0:
            return Pow(Func("reciprocal", base), n)
        return Pow(base, n)

    def atom(self) -> AuxExpr:
        kind, val, col = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if self.peek()[1] == "(":
                if val not in self.functions:
                    raise ParseError(f"unsupported function {val!r}", self.text, col)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(val, arg)
            return Var(val)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {val or 'end of input'!r}", self.text, col)


def parse(text: str, allow_extra: bool = False) -> AuxExpr:
    """Parse an infix expression.

    ``allow_extra`` admits functions (sqrt, tan, log) that can be evaluated
    but have no polynomialization rule; use it for constants and reference
    solutions, never for right-hand sides.
    """
    funcs = FUNCTIONS + EXTRA_FUNCTIONS if allow_extra else FUNCTIONS
    return _Parser(text, funcs).parse()


def parse_constant(value) -> float:
    """A JSON number, or a string such as ``"pi/8"`` with no free variables."""
    if isinstance(value, bool):
        raise ValueError("expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        node = parse(value, allow_extra=True)
        free = variables(node) - set(CONSTANTS)
        if free:
            raise ValueError(f"constant expression {value!r} has free variables {sorted(free)}")
        return float(evaluate(node, {}))
    raise ValueError(f"expected a number or constant expression, got {value!r}")
