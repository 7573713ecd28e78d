"""Expressions of one complex variable: parsing, evaluation, differentiation.

The grammar is deliberately small::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | atom ('^' int)?
    atom   := number | 'i' | 'lambda' | func '(' expr ')' | '(' expr ')'
    func   := exp | log | sin | cos | sqrt | neg

Exponents are integer constants only; general powers have to be written as
``exp(c*log(...))`` so that every branch cut is explicit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

VARIABLE = "lambda"
FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt", "neg")


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message, position):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ExprDomainError(ExprError, ArithmeticError):
    """Raised for division by zero or a log argument on the branch cut."""


class AnalyticExpr:
    """Immutable expression tree node.

    Instances support ``+ - * /`` with other expressions or numbers, which
    is how derived expressions (``p - i g / x`` and friends) are built.
    """

    __slots__ = ()

    def __call__(self, z):
        return evaluate(self, z)

    def __str__(self):
        return to_string(self)

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return power(self, k)


@dataclass(frozen=True, eq=True, repr=True)
class Const(AnalyticExpr):
    value: complex


@dataclass(frozen=True, eq=True, repr=True)
class Var(AnalyticExpr):
    pass


@dataclass(frozen=True, eq=True, repr=True)
class Unary(AnalyticExpr):
    op: str
    arg: AnalyticExpr


@dataclass(frozen=True, eq=True, repr=True)
class Binary(AnalyticExpr):
    op: str
    left: AnalyticExpr
    right: AnalyticExpr


@dataclass(frozen=True, eq=True, repr=True)
class Pow(AnalyticExpr):
    base: AnalyticExpr
    exponent: int


ZERO = Const(0j)
ONE = Const(1 + 0j)
LAMBDA = Var()


def as_expr(value):
    if isinstance(value, AnalyticExpr):
        return value
    if isinstance(value, str):
        return parse(value)
    return Const(complex(value))


def is_const(e, value=None):
    if not isinstance(e, Const):
        return False
    return value is None or e.value == value


# Constructors with light constant folding. No algebraic simplification
# beyond identities with 0 and 1.

def add(a, b):
    if is_const(a) and is_const(b):
        return Const(a.value + b.value)
    if is_const(a, 0):
        return b
    if is_const(b, 0):
        return a
    return Binary("+", a, b)


def sub(a, b):
    if is_const(a) and is_const(b):
        return Const(a.value - b.value)
    if is_const(b, 0):
        return a
    if is_const(a, 0):
        return neg(b)
    return Binary("-", a, b)


def mul(a, b):
    if is_const(a) and is_const(b):
        return Const(a.value * b.value)
    if is_const(a, 0) or is_const(b, 0):
        return ZERO
    if is_const(a, 1):
        return b
    if is_const(b, 1):
        return a
    return Binary("*", a, b)


def div(a, b):
    if is_const(b, 1):
        return a
    if is_const(a, 0) and not is_const(b, 0):
        return ZERO
    if is_const(a) and is_const(b) and b.value != 0:
        return Const(a.value / b.value)
    return Binary("/", a, b)


def neg(a):
    if is_const(a):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def power(a, k):
    k = int(k)
    if k == 0:
        return ONE
    if k == 1:
        return a
    if is_const(a) and (a.value != 0 or k > 0):
        return Const(a.value ** k)
    return Pow(a, k)


def func(name, a):
    if name == "neg":
        return neg(a)
    if is_const(a) and name in ("exp", "sin", "cos"):
        return Const(complex(getattr(np, name)(a.value)))
    return Unary(name, a)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, value):
        kind, text, pos = self.tok
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)
        self.advance()

    def parse(self):
        e = self.expr()
        kind, text, pos = self.tok
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.advance()[1]
            rhs = self.term()
            e = Binary(op, e, rhs)
        return e

    def term(self):
        e = self.factor()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.advance()[1]
            rhs = self.factor()
            e = Binary(op, e, rhs)
        return e

    def factor(self):
        if self.tok[0] == "op" and self.tok[1] == "-":
            self.advance()
            return Unary("neg", self.factor())
        base = self.atom()
        if self.tok[0] == "op" and self.tok[1] == "^":
            self.advance()
            sign = 1
            if self.tok[0] == "op" and self.tok[1] in "+-":
                sign = -1 if self.advance()[1] == "-" else 1
            kind, text, pos = self.tok
            if kind != "num" or not text.isdigit():
                raise ExprSyntaxError("exponent must be an integer constant", pos)
            self.advance()
            return Pow(base, sign * int(text))
        return base

    def atom(self):
        kind, text, pos = self.tok
        if kind == "num":
            self.advance()
            return Const(complex(float(text)))
        if kind == "name":
            self.advance()
            if text == VARIABLE:
                return LAMBDA
            if text == "i":
                return Const(1j)
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", pos)


def parse(text: str) -> AnalyticExpr:
    """Parse ``text`` into an expression tree.

    Raises ExprSyntaxError (with ``.position``) on malformed input and
    UnknownIdentifierError on names outside the grammar.
    """
    return _Parser(text).parse()


# --------------------------------------------------------------- printing

def _fmt_number(c):
    c = complex(c)
    re_, im = c.real, c.imag
    if im == 0:
        s = repr(float(re_))
        return s if re_ >= 0 else f"neg({repr(-float(re_))})"
    if re_ == 0:
        if im == 1:
            return "i"
        mag = f"{repr(abs(float(im)))}*i"
        return mag if im > 0 else f"neg({mag})"
    sign = "+" if im >= 0 else "-"
    return f"({repr(float(re_))}{sign}{repr(abs(float(im)))}*i)" if re_ >= 0 else \
        f"(neg({repr(-float(re_))}){sign}{repr(abs(float(im)))}*i)"


def to_string(e: AnalyticExpr) -> str:
    """Fully parenthesised text that ``parse`` maps back to an equal value."""
    if isinstance(e, Const):
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return VARIABLE
    if isinstance(e, Unary):
        return f"{e.op}({to_string(e.arg)})"
    if isinstance(e, Binary):
        return f"({to_string(e.left)} {e.op} {to_string(e.right)})"
    if isinstance(e, Pow):
        return f"({to_string(e.base)})^{e.exponent}" if e.exponent >= 0 else \
            f"({to_string(e.base)})^-{-e.exponent}"
    raise TypeError(f"not an expression: {e!r}")


# ------------------------------------------------------------- evaluation

def _check_nonzero(d):
    if np.any(d == 0):
        raise ExprDomainError("division by zero")


def evaluate(e: AnalyticExpr, z):
    """Evaluate at a complex scalar or elementwise on an array."""
    scalar = np.ndim(z) == 0
    out = _eval(e, np.asarray(z, dtype=complex))
    if scalar:
        return complex(out)
    return np.broadcast_to(out, np.shape(z)).astype(complex)


def _eval(e, z):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return z
    if isinstance(e, Binary):
        a = _eval(e.left, z)
        b = _eval(e.right, z)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        _check_nonzero(b)
        return a / b
    if isinstance(e, Pow):
        a = _eval(e.base, z)
        if e.exponent < 0:
            _check_nonzero(a)
            return 1.0 / a ** (-e.exponent)
        return a ** e.exponent
    if isinstance(e, Unary):
        a = _eval(e.arg, z)
        op = e.op
        if op == "neg":
            return -a
        if op == "log":
            a = np.asarray(a, dtype=complex)
            if np.any((a.imag == 0) & (a.real <= 0)):
                raise ExprDomainError("log argument on the closed negative real axis")
            return np.log(a)
        return getattr(np, op)(np.asarray(a, dtype=complex))
    raise TypeError(f"not an expression: {e!r}")


# -------------------------------------------------------- differentiation

def differentiate(e: AnalyticExpr) -> AnalyticExpr:
    """Symbolic d/dlambda."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Binary):
        a, b = e.left, e.right
        da, db = differentiate(a), differentiate(b)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, b), mul(a, db))
        # (a/b)' = a'/b - a b'/b^2
        return sub(div(da, b), div(mul(a, db), power(b, 2)))
    if isinstance(e, Pow):
        k = e.exponent
        return mul(mul(Const(complex(k)), power(e.base, k - 1)), differentiate(e.base))
    if isinstance(e, Unary):
        u = e.arg
        du = differentiate(u)
        if e.op == "neg":
            return neg(du)
        if e.op == "exp":
            outer = e
        elif e.op == "log":
            return div(du, u)
        elif e.op == "sin":
            outer = func("cos", u)
        elif e.op == "cos":
            outer = neg(func("sin", u))
        elif e.op == "sqrt":
            return div(du, mul(Const(2 + 0j), e))
        else:
            raise TypeError(f"unknown function {e.op}")
        return mul(outer, du)
    raise TypeError(f"not an expression: {e!r}")


def is_zero(e: AnalyticExpr) -> bool:
    """True when the tree is literally the constant 0 (no symbolic proof)."""
    return is_const(e, 0)
