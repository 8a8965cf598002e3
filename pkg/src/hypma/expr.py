"""A small expression language over the jet variables x, y, z, p, q.

Expressions are immutable trees. They can be parsed from infix text, printed
back in the same grammar, differentiated symbolically and compiled into numpy
callables that evaluate over scalars or arrays.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ('-' | '+') factor | power
    power  := atom (('^' | '**') factor)?
    atom   := number | variable | func '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from .errors import DomainError, ExpressionSyntaxError, UnknownIdentifier

JET_VARIABLES = ("x", "y", "z", "p", "q")
FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt", "abs", "tanh")
_ALIASES = {"log": "ln"}


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of FUNCTIONS
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # add | sub | mul | div | pow
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Unary, Binary]

ZERO = Const(0.0)
ONE = Const(1.0)


@dataclass(frozen=True)
class JetPoint:
    x: float
    y: float
    z: float = 0.0
    p: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        for name in JET_VARIABLES:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"JetPoint.{name} is not finite")

    def as_dict(self):
        return {"x": self.x, "y": self.y, "z": self.z, "p": self.p, "q": self.q}


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExpressionSyntaxError(pos, "number, name, operator or parenthesis", source)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source, variables):
        self.source = source
        self.variables = tuple(variables)
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value, what):
        kind, text, pos = self.peek()
        if text != value or kind not in ("op",):
            raise ExpressionSyntaxError(pos, what, self.source)
        self.take()

    def parse(self):
        e = self.expr()
        kind, _, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(pos, "operator or end of input", self.source)
        return e

    def expr(self):
        e = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in ("+", "-"):
                self.take()
                e = Binary("add" if text == "+" else "sub", e, self.term())
            else:
                return e

    def term(self):
        e = self.factor()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in ("*", "/"):
                self.take()
                e = Binary("mul" if text == "*" else "div", e, self.factor())
            else:
                return e

    def factor(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Unary("neg", self.factor())
        if kind == "op" and text == "+":
            self.take()
            return self.factor()
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text in ("^", "**"):
            self.take()
            return Binary("pow", base, self.factor())
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            name = _ALIASES.get(text, text)
            if name in FUNCTIONS:
                self.expect("(", f"'(' after {text}")
                arg = self.expr()
                self.expect(")", "')'")
                return Unary(name, arg)
            if name in self.variables:
                return Var(name)
            raise UnknownIdentifier(text, pos)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")", "')'")
            return e
        raise ExpressionSyntaxError(pos, "number, variable, function or '('", self.source)


def parse(source: str, variables=JET_VARIABLES) -> Expr:
    """Parse infix text into an expression tree.

    Raises ExpressionSyntaxError for malformed input and UnknownIdentifier for
    any name that is neither an allowed variable nor a supported function.
    """
    return _Parser(source, variables).parse()


def as_expr(e, variables=JET_VARIABLES) -> Expr:
    if isinstance(e, (Const, Var, Unary, Binary)):
        return e
    if isinstance(e, (int, float)):
        return Const(float(e))
    return parse(str(e), variables)


# ---------------------------------------------------------------- printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


def _prec(e):
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary) and e.op == "neg":
        return 3
    if isinstance(e, Const) and e.value < 0:
        return 5  # printed parenthesized
    return 5


def _fmt_const(v):
    if v.is_integer() and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(v)
    return f"({s})" if v < 0 or s.startswith("-") else s


def to_string(e: Expr) -> str:
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = to_string(e.arg)
            return "-" + (f"({inner})" if _prec(e.arg) < 3 else inner)
        return f"{e.op}({to_string(e.arg)})"
    p = _PREC[e.op]
    left, right = to_string(e.left), to_string(e.right)
    if e.op == "pow":
        if _prec(e.left) <= 4:
            left = f"({left})"
        if _prec(e.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {_SYMBOL[e.op]} {right}"


# ------------------------------------------------------- smart constructors

def _is(e, value):
    return isinstance(e, Const) and e.value == value


def _fold(fn, *args):
    try:
        with np.errstate(all="raise"):
            v = fn(*args)
    except (ArithmeticError, ValueError, FloatingPointError):
        return None
    if isinstance(v, complex) or not math.isfinite(v):
        return None
    return Const(float(v))


def add(a, b):
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if isinstance(b, Unary) and b.op == "neg":
        return sub(a, b.arg)
    return Binary("add", a, b)


def sub(a, b):
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _equivalent(a, b):
        return ZERO
    return Binary("sub", a, b)


def _equivalent(a, b):
    """Structural equality up to swapping operands of + and *."""
    if a == b:
        return True
    if isinstance(a, Unary) and isinstance(b, Unary):
        return a.op == b.op and _equivalent(a.arg, b.arg)
    if not (isinstance(a, Binary) and isinstance(b, Binary)) or a.op != b.op:
        return False
    if _equivalent(a.left, b.left) and _equivalent(a.right, b.right):
        return True
    return a.op in ("add", "mul") and _equivalent(a.left, b.right) and _equivalent(a.right, b.left)


def mul(a, b):
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if isinstance(b, Const) and not isinstance(a, Const):
        a, b = b, a
    return Binary("mul", a, b)


def div(a, b):
    if _is(b, 1.0):
        return a
    if _is(a, 0.0) and not _is(b, 0.0):
        return ZERO
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    return Binary("div", a, b)


def power(a, b):
    if _is(b, 1.0):
        return a
    if _is(b, 0.0):
        return ONE
    if isinstance(a, Const) and isinstance(b, Const):
        folded = _fold(lambda u, v: u ** v, a.value, b.value)
        if folded is not None:
            return folded
    return Binary("pow", a, b)


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


_SCALAR_FN = {
    "sin": math.sin, "cos": math.cos, "exp": math.exp, "ln": math.log,
    "sqrt": math.sqrt, "abs": abs, "tanh": math.tanh,
}


def func(op, a):
    if op == "neg":
        return neg(a)
    if isinstance(a, Const):
        folded = _fold(_SCALAR_FN[op], a.value)
        if folded is not None and (op != "ln" or a.value > 0) and (op != "sqrt" or a.value >= 0):
            return folded
    return Unary(op, a)


_BUILD = {"add": add, "sub": sub, "mul": mul, "div": div, "pow": power}


def simplify(e: Expr) -> Expr:
    """Constant folding and trivial-term elimination, bottom-up."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Unary):
        return func(e.op, simplify(e.arg))
    return _BUILD[e.op](simplify(e.left), simplify(e.right))


# --------------------------------------------------------- differentiation

def differentiate(e: Expr, v: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``v``."""
    return _d(e, v)


def _d(e, v):
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if isinstance(e, Unary):
        a = e.arg
        da = _d(a, v)
        if _is(da, 0.0):
            return ZERO
        op = e.op
        if op == "neg":
            return neg(da)
        if op == "sin":
            return mul(func("cos", a), da)
        if op == "cos":
            return neg(mul(func("sin", a), da))
        if op == "exp":
            return mul(func("exp", a), da)
        if op == "ln":
            return div(da, a)
        if op == "sqrt":
            return div(da, mul(Const(2.0), func("sqrt", a)))
        if op == "abs":
            return mul(div(a, func("abs", a)), da)
        if op == "tanh":
            return mul(sub(ONE, power(func("tanh", a), Const(2.0))), da)
        raise ValueError(f"unknown unary op {op}")
    a, b = e.left, e.right
    da, db = _d(a, v), _d(b, v)
    if e.op == "add":
        return add(da, db)
    if e.op == "sub":
        return sub(da, db)
    if e.op == "mul":
        return add(mul(da, b), mul(a, db))
    if e.op == "div":
        if _is(db, 0.0):
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, Const(2.0)))
    if e.op == "pow":
        if _is(db, 0.0):
            # d(a^c) = c a^(c-1) a'
            return mul(mul(b, power(a, sub(b, ONE))), da)
        if _is(da, 0.0):
            return mul(mul(func("ln", a), e), db)
        return mul(e, add(mul(db, func("ln", a)), div(mul(b, da), a)))
    raise ValueError(f"unknown binary op {e.op}")


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions (simultaneously) and simplify."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Unary):
        return func(e.op, substitute(e.arg, mapping))
    return _BUILD[e.op](substitute(e.left, mapping), substitute(e.right, mapping))


def free_variables(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Unary):
        return free_variables(e.arg)
    return free_variables(e.left) | free_variables(e.right)


def contains_op(e: Expr, op: str) -> bool:
    if isinstance(e, (Const, Var)):
        return False
    if isinstance(e, Unary):
        return e.op == op or contains_op(e.arg, op)
    return e.op == op or contains_op(e.left, op) or contains_op(e.right, op)


# -------------------------------------------------------------- evaluation

def _checked_div(a, b):
    if np.any(np.asarray(b) == 0):
        raise DomainError("div-by-zero")
    return a / b


def _checked_ln(a):
    if np.any(np.asarray(a) <= 0):
        raise DomainError("log-nonpositive")
    return np.log(a)


def _checked_sqrt(a):
    if np.any(np.asarray(a) < 0):
        raise DomainError("sqrt-negative")
    return np.sqrt(a)


def _checked_pow(a, b):
    aa, bb = np.asarray(a), np.asarray(b)
    if np.any((aa == 0) & (bb < 0)):
        raise DomainError("0^negative")
    if np.any((aa < 0) & (bb != np.round(bb))):
        raise DomainError("pow-domain", "negative base with non-integer exponent")
    if bb.ndim == 0 and float(bb) == 2.0:
        return a * a
    return np.power(a, b)


_NP_UNARY = {
    "neg": np.negative, "sin": np.sin, "cos": np.cos, "exp": np.exp,
    "ln": _checked_ln, "sqrt": _checked_sqrt, "abs": np.abs, "tanh": np.tanh,
}
_NP_BINARY = {
    "add": np.add, "sub": np.subtract, "mul": np.multiply,
    "div": _checked_div, "pow": _checked_pow,
}


def compile_expr(e: Expr) -> Callable[[Mapping[str, object]], object]:
    """Return ``f(env)`` evaluating ``e`` with numpy semantics.

    ``env`` maps variable names to floats or arrays; the result broadcasts
    accordingly (a constant expression returns a plain float).
    """
    if isinstance(e, Const):
        val = e.value
        return lambda env: val
    if isinstance(e, Var):
        name = e.name
        return lambda env: env[name]
    if isinstance(e, Unary):
        fa = compile_expr(e.arg)
        op = _NP_UNARY[e.op]
        return lambda env: op(fa(env))
    fl, fr = compile_expr(e.left), compile_expr(e.right)
    op = _NP_BINARY[e.op]
    return lambda env: op(fl(env), fr(env))


def evaluate(e: Expr, pt) -> float:
    """Value of ``e`` at a JetPoint (or any name -> value mapping)."""
    env = pt.as_dict() if isinstance(pt, JetPoint) else pt
    with np.errstate(over="ignore", invalid="ignore"):
        return float(compile_expr(e)(env))


def is_constant(e: Expr) -> bool:
    return not free_variables(e)
