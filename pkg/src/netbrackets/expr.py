"""
Expression trees over phase-space variables.

Observables and Hamiltonians are parsed from text into immutable trees of
:class:`Const`, :class:`Var`, :class:`Func`, :class:`BinOp` and :class:`Pow`
nodes. Trees support exact symbolic differentiation and fast numeric
evaluation (each tree is compiled once to a Python function).

Grammar (whitespace insignificant)::

    expr     := term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := '-' factor | base ('^' exponent)?
    base     := number | ident | func '(' expr ')' | '(' expr ')'
    ident    := ('x'|'p') digits?          e.g. x1, p2, or x/p when N = 1
    func     := sin | cos | exp | log | sqrt
    exponent := ['-'] number | '(' ['-'] number ['/' number] ')'

In tagged mode an identifier must carry a time tag, ``x(t)``, ``p2(1/2)``,
``x(tau)``; see :mod:`netbrackets.symbolic`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Func", "BinOp", "Pow", "VarId", "TimeTag",
    "ParseError", "DomainError",
    "parse", "differentiate", "evaluate", "gradient_hessian", "to_string",
    "substitute", "variables", "is_constant", "const", "var",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
Number = Union[Fraction, float]


class ParseError(ValueError):
    """Syntax or identifier error; ``offset`` is the byte offset into the input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class DomainError(ArithmeticError):
    """Numeric evaluation left the domain of a function (log(0), 1/0, ...)."""


@dataclass(frozen=True, order=True)
class VarId:
    kind: str  # "x" or "p"
    index: int

    def __post_init__(self):
        if self.kind not in ("x", "p"):
            raise ValueError(f"variable kind must be 'x' or 'p', got {self.kind!r}")
        if self.index < 1:
            raise ValueError(f"variable index must be >= 1, got {self.index}")

    def __str__(self):
        return f"{self.kind}{self.index}"


@dataclass(frozen=True)
class TimeTag:
    """Exact time label: a rational number or a named symbol such as ``t``, ``t'``, ``tau``."""

    value: Union[Fraction, str]

    def __post_init__(self):
        v = self.value
        if isinstance(v, bool) or not isinstance(v, (Fraction, int, str)):
            raise TypeError(f"time tag must be rational or a name, got {v!r}")
        if isinstance(v, int):
            object.__setattr__(self, "value", Fraction(v))
        if isinstance(v, str):
            object.__setattr__(self, "value", v.replace("′", "'"))

    @property
    def is_rational(self) -> bool:
        return isinstance(self.value, Fraction)

    def sort_key(self):
        # rationals sort before names; names lexicographically
        if self.is_rational:
            return (0, self.value, "")
        return (1, Fraction(0), self.value)

    def __lt__(self, other: "TimeTag"):
        return self.sort_key() < other.sort_key()

    def __str__(self):
        return str(self.value)


class Expr:
    """Base class of expression nodes. Nodes are immutable and hashable."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, eq=True, repr=False)
class Const(Expr):
    value: Number

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Var(Expr):
    kind: str
    index: int
    tag: Union[TimeTag, None] = None
    # printed as bare x/p; not part of structural identity
    alias: bool = field(default=False, compare=False)

    @property
    def var_id(self) -> VarId:
        return VarId(self.kind, self.index)

    def __repr__(self):
        tag = f", tag={self.tag}" if self.tag is not None else ""
        return f"Var({self.kind}{self.index}{tag})"


@dataclass(frozen=True, eq=True, repr=False)
class Func(Expr):
    name: str  # sin cos exp log sqrt neg
    arg: Expr

    def __repr__(self):
        return f"Func({self.name}, {self.arg!r})"


@dataclass(frozen=True, eq=True, repr=False)
class BinOp(Expr):
    op: str  # + - * /
    left: Expr
    right: Expr

    def __repr__(self):
        return f"BinOp({self.op!r}, {self.left!r}, {self.right!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Pow(Expr):
    base: Expr
    exponent: Fraction

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exponent})"


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def const(value) -> Const:
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return Const(Fraction(value))
    return Const(float(value))


def var(name: str, n_dof: int = 1) -> Var:
    """Shorthand: ``var("x2")`` or ``var("p")`` (the latter only when ``n_dof == 1``)."""
    return parse(name, n_dof)


def _lift(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, Fraction)) and not isinstance(value, bool):
        return const(value)
    raise TypeError(f"cannot use {type(value).__name__} in an expression")


# ---------------------------------------------------------------------------
# simplifying constructors (used by differentiation and operator overloads;
# the parser builds raw nodes so that printing round-trips structurally)

def _is_const(e: Expr, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def _fold(a: Number, b: Number, op: str) -> Number:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    return a / b


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(_fold(a.value, b.value, "+"))
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    if isinstance(b, Func) and b.name == "neg":
        return sub(a, b.arg)
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(_fold(a.value, b.value, "-"))
    if _is_const(b, 0):
        return a
    if _is_const(a, 0):
        return neg(b)
    if a == b:
        return ZERO
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(_fold(a.value, b.value, "*"))
    if _is_const(a, 0) or _is_const(b, 0):
        return ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if _is_const(a, -1):
        return neg(b)
    if _is_const(b, -1):
        return neg(a)
    # gather constant factors on the left: c1*(c2*u) -> (c1*c2)*u
    if _is_const(a) and isinstance(b, BinOp) and b.op == "*" and _is_const(b.left):
        return mul(Const(_fold(a.value, b.left.value, "*")), b.right)
    if _is_const(b) and not _is_const(a):
        return mul(b, a)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0):
        return BinOp("/", a, b)  # left for evaluation to report
    if _is_const(a) and _is_const(b):
        return Const(a.value / b.value)
    if _is_const(a, 0):
        return ZERO
    if _is_const(b, 1):
        return a
    if _is_const(b) and isinstance(b.value, Fraction):
        return mul(Const(1 / b.value), a)
    return BinOp("/", a, b)


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Func) and a.name == "neg":
        return a.arg
    if isinstance(a, BinOp) and a.op == "*" and _is_const(a.left):
        return mul(Const(-a.left.value), a.right)
    return Func("neg", a)


def power(base: Expr, exponent) -> Expr:
    exponent = Fraction(exponent) if not isinstance(exponent, Fraction) else exponent
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if _is_const(base) and isinstance(base.value, Fraction) and exponent.denominator == 1:
        if base.value != 0 or exponent > 0:
            return Const(base.value ** int(exponent))
    if isinstance(base, Pow):
        # (u^a)^b = u^(ab) is safe for integer b
        if exponent.denominator == 1:
            return power(base.base, base.exponent * exponent)
    return Pow(base, exponent)


def func(name: str, arg: Expr) -> Expr:
    if name == "neg":
        return neg(arg)
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    if _is_const(arg, 0):
        if name == "sin":
            return ZERO
        if name in ("cos", "exp"):
            return ONE
        if name == "sqrt":
            return ZERO
    if _is_const(arg, 1) and name == "log":
        return ZERO
    return Func(name, arg)


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_τ][A-Za-z0-9_τ]*'*′*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)
_IDENT_RE = re.compile(r"^([xp])(\d*)$")


@dataclass
class _Token:
    kind: str
    text: str
    pos: int  # character position


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text: str, n_dof: int, tagged: bool):
        self.text = text
        self.n_dof = n_dof
        self.tagged = tagged
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: _Token = None):
        tok = tok or self.tok
        return ParseError(message, _byte_offset(self.text, tok.pos))

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        if self.accept("-"):
            return Func("neg", self.factor())
        base = self.base()
        if self.accept("^"):
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> Fraction:
        if self.accept("("):
            value = self.signed_number()
            if self.accept("/"):
                den_tok = self.tok
                den = self.signed_number()
                if den == 0:
                    raise self.error("zero denominator in exponent", den_tok)
                value = value / den
            self.expect(")")
            return value
        return self.signed_number()

    def signed_number(self) -> Fraction:
        sign = -1 if self.accept("-") else 1
        tok = self.tok
        if tok.kind != "number":
            raise self.error("exponent must be a constant integer or rational")
        self.i += 1
        return sign * Fraction(tok.text)

    def base(self) -> Expr:
        tok = self.tok
        if tok.kind == "number":
            self.i += 1
            if re.fullmatch(r"\d+", tok.text):
                return Const(Fraction(int(tok.text)))
            return Const(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(tok.text, arg)
            return self.variable(tok)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        found = tok.text or "end of input"
        raise self.error(f"unexpected {found!r}")

    def variable(self, tok: _Token) -> Var:
        m = _IDENT_RE.match(tok.text)
        if m is None:
            if tok.text in ("t", "time"):
                raise self.error("explicit time dependence is not supported", tok)
            raise self.error(f"unknown identifier {tok.text!r}", tok)
        kind, digits = m.groups()
        if digits:
            index, alias = int(digits), False
        elif self.n_dof == 1:
            index, alias = 1, True
        else:
            raise self.error(
                f"bare {kind!r} is only allowed for one degree of freedom; use {kind}1..{kind}{self.n_dof}",
                tok)
        if not 1 <= index <= self.n_dof:
            raise self.error(f"variable {tok.text!r} out of range 1..{self.n_dof}", tok)
        tag = None
        if self.tagged:
            self.expect("(")
            tag = self.time_tag()
            self.expect(")")
        return Var(kind, index, tag, alias)

    def time_tag(self) -> TimeTag:
        tok = self.tok
        if tok.kind == "name":
            self.i += 1
            return TimeTag(tok.text)
        sign = -1 if self.accept("-") else 1
        if self.tok.kind != "number":
            raise self.error("time tag must be a rational number or a name")
        value = sign * Fraction(self.tok.text)
        self.i += 1
        if self.accept("/"):
            if self.tok.kind != "number":
                raise self.error("expected denominator")
            den = Fraction(self.tok.text)
            if den == 0:
                raise self.error("zero denominator in time tag")
            value /= den
            self.i += 1
        return TimeTag(value)


def parse(text: str, n_dof: int = 1, *, tagged: bool = False) -> Expr:
    """Parse ``text`` into an expression over ``x1..xN, p1..pN``.

    Raises :class:`ParseError` (a ``ValueError``) with the byte offset of the
    offending token for syntax errors, unknown identifiers and out-of-range
    variable indices.
    """
    if n_dof < 1:
        raise ValueError("n_dof must be >= 1")
    return _Parser(text, n_dof, tagged).parse()


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Func) and e.name == "neg":
        return 3
    if isinstance(e, Const) and e.value < 0:
        return 3
    if isinstance(e, Const) and isinstance(e.value, Fraction) and e.value.denominator != 1:
        return 2
    if isinstance(e, Pow):
        return 4
    return 5


def _fmt_number(v: Number) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        return f"{v.numerator}/{v.denominator}"
    return repr(float(v))


def _fmt_exponent(q: Fraction) -> str:
    if q.denominator == 1 and q >= 0:
        return str(q.numerator)
    return f"({_fmt_number(q)})"


def to_string(e: Expr) -> str:
    """Print ``e`` so that :func:`parse` of the result gives back ``e``."""
    if isinstance(e, Const):
        return _fmt_number(e.value)
    if isinstance(e, Var):
        name = e.kind if e.alias else f"{e.kind}{e.index}"
        if e.tag is not None:
            name += f"({e.tag})"
        return name
    if isinstance(e, Func):
        if e.name == "neg":
            inner = to_string(e.arg)
            return "-" + (inner if _prec(e.arg) >= 3 else f"({inner})")
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Pow):
        inner = to_string(e.base)
        if _prec(e.base) < 5:
            inner = f"({inner})"
        return f"{inner}^{_fmt_exponent(e.exponent)}"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left = to_string(e.left)
        if _prec(e.left) < p:
            left = f"({left})"
        right = to_string(e.right)
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}" if p == 1 else f"{left}*{right}" if e.op == "*" else f"{left}/{right}"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# structure queries

def variables(e: Expr) -> set[Var]:
    """All variable nodes appearing in ``e``."""
    out: set[Var] = set()

    def walk(node):
        if isinstance(node, Var):
            out.add(node)
        elif isinstance(node, Func):
            walk(node.arg)
        elif isinstance(node, Pow):
            walk(node.base)
        elif isinstance(node, BinOp):
            walk(node.left)
            walk(node.right)

    walk(e)
    return out


def is_constant(e: Expr) -> bool:
    return not variables(e)


def max_index(e: Expr) -> int:
    return max((v.index for v in variables(e)), default=0)


def substitute(e: Expr, mapping: Mapping[Var, Expr] | Callable[[Var], Expr]) -> Expr:
    """Replace variable nodes. ``mapping`` may be a dict or a function of the node."""
    lookup = mapping if callable(mapping) else (lambda v: mapping.get(v, v))

    def rec(node):
        if isinstance(node, Var):
            return lookup(node)
        if isinstance(node, Const):
            return node
        if isinstance(node, Func):
            return func(node.name, rec(node.arg))
        if isinstance(node, Pow):
            return power(rec(node.base), node.exponent)
        return _BIN[node.op](rec(node.left), rec(node.right))

    return rec(e)


_BIN = {"+": add, "-": sub, "*": mul, "/": div}


# ---------------------------------------------------------------------------
# differentiation

def _matcher(v) -> Callable[[Var], bool]:
    if isinstance(v, Var):
        return lambda node: node == v
    if isinstance(v, VarId):
        return lambda node: node.kind == v.kind and node.index == v.index
    if isinstance(v, str):
        m = _IDENT_RE.match(v)
        if m is None:
            raise ValueError(f"not a variable name: {v!r}")
        return _matcher(VarId(m.group(1), int(m.group(2) or 1)))
    raise TypeError(f"cannot differentiate with respect to {v!r}")


def differentiate(e: Expr, v) -> Expr:
    """Exact derivative of ``e`` with respect to ``v``.

    ``v`` is a :class:`VarId`, a name such as ``"x2"``, or a specific
    (possibly time-tagged) :class:`Var` node.
    """
    match = _matcher(v)
    cache: dict[Expr, Expr] = {}

    def d(node: Expr) -> Expr:
        if node in cache:
            return cache[node]
        if isinstance(node, Const):
            out = ZERO
        elif isinstance(node, Var):
            out = ONE if match(node) else ZERO
        elif isinstance(node, BinOp):
            u, w = node.left, node.right
            du, dw = d(u), d(w)
            if node.op == "+":
                out = add(du, dw)
            elif node.op == "-":
                out = sub(du, dw)
            elif node.op == "*":
                out = add(mul(du, w), mul(u, dw))
            elif is_constant(w):
                out = div(du, w)
            else:
                out = div(sub(mul(du, w), mul(u, dw)), power(w, 2))
        elif isinstance(node, Pow):
            du = d(node.base)
            n = node.exponent
            out = mul(mul(Const(n), power(node.base, n - 1)), du)
        elif isinstance(node, Func):
            u = node.arg
            du = d(u)
            if _is_const(du, 0):
                out = ZERO
            elif node.name == "neg":
                out = neg(du)
            elif node.name == "sin":
                out = mul(func("cos", u), du)
            elif node.name == "cos":
                out = neg(mul(func("sin", u), du))
            elif node.name == "exp":
                out = mul(node, du)
            elif node.name == "log":
                out = div(du, u)
            elif node.name == "sqrt":
                out = div(du, mul(Const(Fraction(2)), node))
            else:
                raise ValueError(f"unknown function {node.name!r}")
        else:
            raise TypeError(f"not an expression: {node!r}")
        cache[node] = out
        return out

    return d(e)


# ---------------------------------------------------------------------------
# numeric evaluation (compiled)

def _safe_pow(u: float, q: float) -> float:
    if u < 0:
        raise DomainError(f"non-integer power of negative number {u!r}")
    if u == 0 and q < 0:
        raise DomainError("zero raised to a negative power")
    return u ** q


def _safe_log(u: float) -> float:
    if u <= 0:
        raise DomainError(f"log of non-positive number {u!r}")
    return math.log(u)


def _safe_sqrt(u: float) -> float:
    if u < 0:
        raise DomainError(f"sqrt of negative number {u!r}")
    return math.sqrt(u)


_ENV = {
    "sin": math.sin, "cos": math.cos, "exp": math.exp,
    "log": _safe_log, "sqrt": _safe_sqrt, "_pow": _safe_pow,
}


def _code(e: Expr) -> str:
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        if e.tag is not None:
            raise ValueError(f"cannot evaluate time-tagged variable {to_string(e)}")
        return f"{e.kind}[{e.index - 1}]"
    if isinstance(e, Func):
        if e.name == "neg":
            return f"(-{_code(e.arg)})"
        return f"{e.name}({_code(e.arg)})"
    if isinstance(e, Pow):
        q = e.exponent
        if q.denominator == 1:
            return f"({_code(e.base)})**{int(q)}"
        return f"_pow({_code(e.base)}, {float(q)!r})"
    return f"({_code(e.left)} {e.op} {_code(e.right)})"


def _compile(body: str):
    source = f"def _f(x, p):\n    return {body}\n"
    namespace = dict(_ENV)
    exec(compile(source, "<netbrackets-expr>", "exec"), namespace)
    return namespace["_f"]


def _guard(fn):
    def wrapped(x, p):
        try:
            return fn(x, p)
        except ZeroDivisionError as exc:
            raise DomainError("division by zero") from exc
        except OverflowError as exc:
            raise DomainError("numeric overflow") from exc
        except ValueError as exc:
            raise DomainError(str(exc)) from exc
    return wrapped


@lru_cache(maxsize=4096)
def compile_scalar(e: Expr) -> Callable[[Sequence[float], Sequence[float]], float]:
    """Compile ``e`` into ``f(x, p) -> float`` over plain float sequences."""
    return _guard(_compile(_code(e)))


@lru_cache(maxsize=1024)
def compile_many(exprs: tuple[Expr, ...]) -> Callable[[Sequence[float], Sequence[float]], list]:
    """Compile several expressions into one function returning a list of floats."""
    return _guard(_compile("[" + ", ".join(_code(e) for e in exprs) + "]"))


def _split_binding(binding, n: int = None) -> tuple[list[float], list[float]]:
    if hasattr(binding, "x") and hasattr(binding, "p"):
        return [float(v) for v in binding.x], [float(v) for v in binding.p]
    if isinstance(binding, Mapping):
        xs, ps = {}, {}
        for key, value in binding.items():
            vid = key if isinstance(key, VarId) else _parse_varid(str(key))
            (xs if vid.kind == "x" else ps)[vid.index] = float(value)
        size = max([0, *xs, *ps])
        return ([xs.get(i, math.nan) for i in range(1, size + 1)],
                [ps.get(i, math.nan) for i in range(1, size + 1)])
    z = [float(v) for v in binding]
    if len(z) % 2:
        raise ValueError("a flat binding must have even length (x1..xN, p1..pN)")
    half = len(z) // 2
    return z[:half], z[half:]


def _parse_varid(name: str) -> VarId:
    m = _IDENT_RE.match(name)
    if m is None:
        raise ValueError(f"not a variable name: {name!r}")
    return VarId(m.group(1), int(m.group(2) or 1))


def evaluate(e: Expr, binding) -> float:
    """Evaluate ``e`` in double precision.

    ``binding`` is a :class:`~netbrackets.dynamics.PhaseState` (anything with
    ``x`` and ``p`` sequences), a mapping ``{"x1": 1.0, ...}``, or a flat
    sequence ordered ``(x1..xN, p1..pN)``. Domain violations raise
    :class:`DomainError`, as does a non-finite result.
    """
    x, p = _split_binding(binding)
    for v in variables(e):
        if v.tag is not None:
            raise ValueError(f"cannot evaluate time-tagged variable {to_string(v)}")
        seq = x if v.kind == "x" else p
        if v.index > len(seq) or math.isnan(seq[v.index - 1]):
            raise ValueError(f"binding does not supply {v.kind}{v.index}")
    value = compile_scalar(e)(x, p)
    if not math.isfinite(value):
        raise DomainError(f"non-finite value {value!r}")
    return value


def gradient_exprs(e: Expr, n_dof: int) -> tuple[Expr, ...]:
    ids = [VarId("x", i) for i in range(1, n_dof + 1)] + [VarId("p", i) for i in range(1, n_dof + 1)]
    return tuple(differentiate(e, v) for v in ids)


def hessian_exprs(e: Expr, n_dof: int) -> tuple[tuple[Expr, ...], ...]:
    ids = [VarId("x", i) for i in range(1, n_dof + 1)] + [VarId("p", i) for i in range(1, n_dof + 1)]
    grad = gradient_exprs(e, n_dof)
    upper = {(i, j): differentiate(grad[i], ids[j]) for i in range(len(ids)) for j in range(i, len(ids))}
    # mirror the upper triangle so the result is symmetric by construction
    return tuple(tuple(upper[min(i, j), max(i, j)] for j in range(len(ids))) for i in range(len(ids)))


def gradient_hessian(e: Expr, z, n_dof: int = None) -> tuple[np.ndarray, np.ndarray]:
    """Gradient (length 2N, ordered x1..xN, p1..pN) and Hessian (2N x 2N) at ``z``."""
    x, p = _split_binding(z)
    n = n_dof or len(x)
    grad = gradient_exprs(e, n)
    hess = hessian_exprs(e, n)
    flat = compile_many(grad + tuple(h for row in hess for h in row))(x, p)
    values = np.array(flat, dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError("non-finite derivative value")
    return values[: 2 * n], values[2 * n:].reshape(2 * n, 2 * n)
