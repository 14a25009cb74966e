"""Scalar expressions with exact forward-mode first derivatives.

Grammar (whitespace is ignored)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" integer)?
    integer := "-"? DIGITS | "(" "-"? DIGITS ")"
    atom    := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"
    FUNC    := exp | ln | sin | cos | sqrt

Numbers are read exactly as rationals (``0.25`` is ``1/4``).  Exponents are
integer literals, so ``-x^2`` means ``-(x^2)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import PreconditionError

FUNCTIONS = ("exp", "ln", "sin", "cos", "sqrt")


class ExprSyntaxError(PreconditionError):
    """Parse failure; ``position`` is a 0-based offset into the text."""

    def __init__(self, message: str, text: str, position: int):
        line = text.count("\n", 0, position) + 1
        column = position - (text.rfind("\n", 0, position) + 1) + 1
        super().__init__(f"{message} at position {position} (line {line}, column {column})")
        self.position = position
        self.line = line
        self.column = column


class ExprDomainError(PreconditionError):
    pass


class UnboundVariableError(PreconditionError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, Bin, Pow, Call]


def variables(e: Expr) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Bin):
        return variables(e.left) | variables(e.right)
    if isinstance(e, (Neg, Call)):
        return variables(e.arg)
    return variables(e.base)


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")


def _tokenize(text: str):
    toks = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if not m:
            break
        start = m.start(m.lastindex)
        if m.group(1):
            toks.append(("num", m.group(1), start))
        elif m.group(2):
            toks.append(("name", m.group(2), start))
        else:
            if m.group(3) not in "+-*/^()":
                raise ExprSyntaxError(f"unexpected character {m.group(3)!r}", text, start)
            toks.append(("op", m.group(3), start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        if tok[0] == "end":
            msg = "unexpected end of input"
        raise ExprSyntaxError(msg, self.text, tok[2])

    def expect(self, op):
        t = self.peek()
        if t[0] != "op" or t[1] != op:
            self.error(f"expected {op!r}")
        return self.take()

    def parse(self):
        e = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected {self.peek()[1]!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            e = Bin(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            e = Bin(op, e, self.unary())
        return e

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Pow(base, self.integer())
        return base

    def integer(self):
        paren = self.peek()[:2] == ("op", "(")
        if paren:
            self.take()
        sign = 1
        if self.peek()[:2] == ("op", "-"):
            self.take()
            sign = -1
        t = self.peek()
        if t[0] != "num" or not t[1].isdigit():
            self.error("exponent must be an integer literal")
        self.take()
        if paren:
            self.expect(")")
        return sign * int(t[1])

    def atom(self):
        t = self.peek()
        if t[0] == "num":
            self.take()
            return Num(Fraction(t[1]))
        if t[0] == "name":
            self.take()
            if t[1] in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(t[1], arg)
            return Var(t[1])
        if t[:2] == ("op", "("):
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        self.error(f"unexpected {t[1]!r}")


def parse(text: str) -> Expr:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printer

# printing contexts: operand positions, ordered by binding strength
_ADD_L, _ADD_R, _MUL_L, _MUL_R, _UNARY, _BASE = range(6)


def _num_str(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    den, a, b = v.denominator, 0, 0
    while den % 2 == 0:
        den //= 2
        a += 1
    while den % 5 == 0:
        den //= 5
        b += 1
    if den != 1:
        return f"({v.numerator}/{v.denominator})"
    k = max(a, b)
    digits = str(abs(v.numerator) * 10 ** k // v.denominator).rjust(k + 1, "0")
    return ("-" if v < 0 else "") + f"{digits[:-k]}.{digits[-k:]}"


def to_string(e: Expr) -> str:
    """Canonical text; ``parse(to_string(e)) == e`` for parsed trees."""
    return _show(e, _ADD_L)


def _show(e: Expr, ctx: int) -> str:
    if isinstance(e, Num):
        s = _num_str(e.value)
        return f"({s})" if e.value < 0 else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({_show(e.arg, _ADD_L)})"
    if isinstance(e, Pow):
        n = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
        s = f"{_show(e.base, _BASE)}^{n}"
        return f"({s})" if ctx == _BASE else s
    if isinstance(e, Neg):
        s = "-" + _show(e.arg, _UNARY)
        return f"({s})" if ctx == _BASE else s
    if e.op in "+-":
        s = f"{_show(e.left, _ADD_L)} {e.op} {_show(e.right, _ADD_R)}"
        return f"({s})" if ctx >= _ADD_R else s
    s = f"{_show(e.left, _MUL_L)}{e.op}{_show(e.right, _MUL_R)}"
    return f"({s})" if ctx >= _MUL_R else s


# ---------------------------------------------------------------------------
# forward-mode evaluation


class DualValue:
    """Value with first partials; arrays broadcast over leading axes.

    ``value`` has shape ``S`` and ``partials`` shape ``S + (n,)``.
    """

    __slots__ = ("value", "partials")

    def __init__(self, value, partials):
        self.value = np.asarray(value, dtype=float)
        self.partials = np.asarray(partials, dtype=float)

    @classmethod
    def variable(cls, value, index: int, n: int):
        value = np.asarray(value, dtype=float)
        d = np.zeros(value.shape + (n,))
        d[..., index] = 1.0
        return cls(value, d)

    @classmethod
    def constant(cls, value, n: int):
        value = np.asarray(value, dtype=float)
        return cls(value, np.zeros(value.shape + (n,)))

    def _lift(self, other):
        if isinstance(other, DualValue):
            return other
        return DualValue.constant(other, self.partials.shape[-1])

    def __add__(self, o):
        o = self._lift(o)
        return DualValue(self.value + o.value, self.partials + o.partials)

    __radd__ = __add__

    def __neg__(self):
        return DualValue(-self.value, -self.partials)

    def __sub__(self, o):
        return self + (-self._lift(o))

    def __rsub__(self, o):
        return self._lift(o) - self

    def __mul__(self, o):
        o = self._lift(o)
        return DualValue(self.value * o.value,
                         self.partials * o.value[..., None] + o.partials * self.value[..., None])

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = self._lift(o)
        if np.any(o.value == 0):
            raise ExprDomainError("division by zero")
        v = self.value / o.value
        return DualValue(v, (self.partials - o.partials * v[..., None]) / o.value[..., None])

    def __pow__(self, n: int):
        if n == 0:
            return DualValue.constant(np.ones_like(self.value), self.partials.shape[-1])
        if n < 0 and np.any(self.value == 0):
            raise ExprDomainError("negative power of zero")
        return DualValue(self.value ** n, n * (self.value ** (n - 1))[..., None] * self.partials)

    def _chain(self, f, df):
        return DualValue(f, df[..., None] * self.partials)

    def __repr__(self):
        return f"DualValue({self.value}, {self.partials})"


def _apply(fn: str, a: DualValue) -> DualValue:
    v = a.value
    if fn == "exp":
        e = np.exp(v)
        return a._chain(e, e)
    if fn == "ln":
        if np.any(v <= 0):
            raise ExprDomainError("ln of a non-positive number")
        return a._chain(np.log(v), 1.0 / v)
    if fn == "sin":
        return a._chain(np.sin(v), np.cos(v))
    if fn == "cos":
        return a._chain(np.cos(v), -np.sin(v))
    if fn == "sqrt":
        if np.any(v < 0):
            raise ExprDomainError("sqrt of a negative number")
        if np.any(v == 0) and np.any(a.partials != 0):
            raise ExprDomainError("sqrt is not differentiable at 0")
        s = np.sqrt(v)
        with np.errstate(divide="ignore"):
            return a._chain(s, np.where(s > 0, 0.5 / np.where(s > 0, s, 1.0), 0.0))
    raise ExprDomainError(f"unknown function {fn}")


def eval_dual(e: Expr, env: Mapping[str, DualValue]) -> DualValue:
    if isinstance(e, Var):
        if e.name not in env:
            raise UnboundVariableError(f"unbound variable {e.name!r}")
        return env[e.name]
    if isinstance(e, Num):
        n = next(iter(env.values())).partials.shape if env else (0,)
        return DualValue(np.full(n[:-1], float(e.value)), np.zeros(n))
    if isinstance(e, Neg):
        return -eval_dual(e.arg, env)
    if isinstance(e, Bin):
        a, b = eval_dual(e.left, env), eval_dual(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return a / b
    if isinstance(e, Pow):
        return eval_dual(e.base, env) ** e.exponent
    return _apply(e.fn, eval_dual(e.arg, env))


def eval_point(e: Expr, names: Sequence[str], u) -> DualValue:
    """Evaluate at parameter array ``u`` (last axis = parameters) with partials."""
    u = np.asarray(u, dtype=float)
    n = len(names)
    if u.shape[-1:] != (n,):
        raise PreconditionError(f"need {n} parameter values")
    env = {name: DualValue.variable(u[..., i], i, n) for i, name in enumerate(names)}
    return eval_dual(e, env)


def evaluate(e: Expr, env: Mapping[str, object]):
    """Plain numeric value (no derivatives)."""
    duals = {k: DualValue.constant(v, 0) for k, v in env.items()}
    if not duals:
        duals = {"_": DualValue.constant(0.0, 0)}
    return eval_dual(e, duals).value


# ---------------------------------------------------------------------------
# random expressions (property tests)


def random_expr(rng: np.random.Generator, names: Sequence[str], depth: int = 3) -> Expr:
    """Random expression that is smooth on all of ``R^n``.

    Arguments of ``ln``/``sqrt`` and denominators are kept positive by
    construction, e.g. ``ln(1 + e^2)``.
    """
    if depth <= 0 or rng.random() < 0.25:
        if rng.random() < 0.6:
            return Var(names[rng.integers(len(names))])
        return Num(Fraction(int(rng.integers(1, 20)), int(rng.choice([1, 2, 4, 5, 10]))))
    kind = rng.integers(7)
    sub = lambda: random_expr(rng, names, depth - 1)
    positive = lambda a: Bin("+", Num(Fraction(1)), Pow(a, 2))
    if kind == 0:
        return Bin(rng.choice(["+", "-"]), sub(), sub())
    if kind == 1:
        return Bin("*", sub(), sub())
    if kind == 2:
        return Bin("/", sub(), positive(sub()))
    if kind == 3:
        return Pow(sub(), int(rng.integers(0, 4)))
    if kind == 4:
        return Neg(sub())
    if kind == 5:
        return Call(rng.choice(["sin", "cos"]), sub())
    fn = rng.choice(["exp", "ln", "sqrt"])
    if fn == "exp":
        return Call("exp", Call("sin", sub()))
    return Call(fn, positive(sub()))
