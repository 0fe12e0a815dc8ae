"""Small expression language for coefficient functions of t and x.

Expressions are immutable ASTs over complex constants, the imaginary
unit ``i``, the time variable ``t``, space variables ``x1..xn``, and
named parameters, combined with ``+ - * / ^``, unary minus, and the
function vocabulary sin, cos, exp, sqrt, abs, log.  The module
provides a parser, a printer whose output re-parses to the same AST,
strict pointwise evaluation over the complex numbers, vectorised grid
evaluation, and symbolic differentiation in t.

Smoothness of user-supplied expressions on the time interval is the
caller's contract; evaluation raises at genuinely singular points
(division by zero, log of zero) rather than guessing.
"""

from __future__ import annotations

import cmath
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs", "log")


class ExprError(Exception):
    """Base class for expression-language errors."""


class ExprSyntaxError(ExprError):
    """Parse failure; carries the byte offset and the expected token set."""

    def __init__(self, message, offset, expected=()):
        detail = f"{message} at offset {offset}"
        if expected:
            detail += ", expected one of " + ", ".join(repr(e) for e in sorted(expected))
        super().__init__(detail)
        self.offset = offset
        self.expected = frozenset(expected)


class ExprEvalError(ExprError):
    """Evaluation failure: unbound symbol or arithmetic error at the point."""


class ExprDiffError(ExprError):
    """Differentiation failure (abs on a t-dependent subtree, t^t, ...)."""


# ---------------------------------------------------------------------------
# AST nodes


@dataclass(frozen=True)
class Num:
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True)
class ImagUnit:
    pass


@dataclass(frozen=True)
class Var:
    # "t" or "x<digits>"
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, ImagUnit, Var, Param, Neg, Add, Sub, Mul, Div, Pow, Call]

ZERO = Num(0.0)
ONE = Num(1.0)
I = ImagUnit()
MINUS_I = Num(-1j)


def is_zero(e) -> bool:
    return isinstance(e, Num) and e.value == 0


def is_one(e) -> bool:
    return isinstance(e, Num) and e.value == 1


# ---------------------------------------------------------------------------
# Smart constructors.  These apply only local, value-preserving rewrites
# (constant folding, dropping literal 0/1 factors, x - x -> 0); they are not
# a general simplifier.


def neg_e(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add_e(a: Expr, b: Expr) -> Expr:
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if b == neg_e(a) or a == neg_e(b):
        return ZERO
    return Add(a, b)


def sub_e(a: Expr, b: Expr) -> Expr:
    if is_zero(b):
        return a
    if is_zero(a):
        return neg_e(b)
    if a == b:
        return ZERO
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return Sub(a, b)


def mul_e(a: Expr, b: Expr) -> Expr:
    if is_zero(a) or is_zero(b):
        return ZERO
    if is_one(a):
        return b
    if is_one(b):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if isinstance(a, Num) and a.value == -1:
        return neg_e(b)
    if isinstance(b, Num) and b.value == -1:
        return neg_e(a)
    return Mul(a, b)


def div_e(a: Expr, b: Expr) -> Expr:
    if is_zero(a) and not is_zero(b):
        return ZERO
    if is_one(b):
        return a
    return Div(a, b)


# ---------------------------------------------------------------------------
# Tokenizer / parser


_NUM_RE = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN_RE = re.compile(
    rf"(?P<num>{_NUM_RE})|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()])"
)
_WS_RE = re.compile(r"\s*")
_XVAR_RE = re.compile(r"^x\d+$")


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        pos = _WS_RE.match(source, pos).end()
        if pos >= n:
            break
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(
                f"unexpected character {source[pos]!r}", _byte_offset(source, pos)
            )
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("eof", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.idx = 0

    def peek(self) -> _Token:
        return self.tokens[self.idx]

    def advance(self) -> _Token:
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def error(self, message, tok, expected=()):
        raise ExprSyntaxError(message, _byte_offset(self.source, tok.pos), expected)

    def expect_op(self, text):
        tok = self.peek()
        if tok.kind == "op" and tok.text == text:
            return self.advance()
        self.error(f"syntax error near {tok.text!r}" if tok.kind != "eof" else "unexpected end of input", tok, {text})

    # expr := term (("+"|"-") term)*
    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.parse_term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    # term := factor (("*"|"/") factor)*
    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            rhs = self.parse_factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    # factor := ("-")? power
    def parse_factor(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return Neg(self.parse_power())
        return self.parse_power()

    # power := atom ("^" factor)?   (right associative)
    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            exponent = self.parse_factor()
            return Pow(base, exponent)
        return base

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                if name not in FUNCTIONS:
                    raise ExprSyntaxError(
                        f"unknown function {name!r}",
                        _byte_offset(self.source, tok.pos),
                        set(FUNCTIONS),
                    )
                self.advance()
                arg = self.parse_expr()
                self.expect_op(")")
                return Call(name, arg)
            if name == "i":
                return ImagUnit()
            if name == "t" or _XVAR_RE.match(name):
                return Var(name)
            return Param(name)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.parse_expr()
            self.expect_op(")")
            return node
        self.error(
            "unexpected end of input" if tok.kind == "eof" else f"syntax error near {tok.text!r}",
            tok,
            {"number", "identifier", "(", "-"},
        )


def parse(source: str) -> Expr:
    """Parse a source string into an expression AST."""
    p = _Parser(source)
    node = p.parse_expr()
    tok = p.peek()
    if tok.kind != "eof":
        p.error(f"trailing input {tok.text!r}", tok, {"+", "-", "*", "/", "^", "end of input"})
    return node


# ---------------------------------------------------------------------------
# Printer.  For any AST produced by parse(), parse(to_source(e)) == e.  For
# programmatically built ASTs (negative or complex Num values) the printed
# form re-parses to an AST with the same value.

_LVL_ADD, _LVL_MUL, _LVL_UNARY, _LVL_POW, _LVL_ATOM = 1, 2, 3, 4, 5


def _fmt_real(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return repr(v)
    return repr(v)


def _num_src(value: complex):
    re_, im = value.real, value.imag
    if im == 0:
        if re_ >= 0:
            return _fmt_real(re_), _LVL_ATOM
        return "-" + _fmt_real(-re_), _LVL_UNARY
    if re_ == 0:
        if im == 1:
            return "i", _LVL_ATOM
        if im == -1:
            return "-i", _LVL_UNARY
        if im > 0:
            return f"i*{_fmt_real(im)}", _LVL_MUL
        return f"-i*{_fmt_real(-im)}", _LVL_MUL
    sign = "+" if im > 0 else "-"
    return f"({_fmt_real(re_)} {sign} i*{_fmt_real(abs(im))})", _LVL_ATOM


def _src(e: Expr):
    if isinstance(e, Num):
        return _num_src(e.value)
    if isinstance(e, ImagUnit):
        return "i", _LVL_ATOM
    if isinstance(e, (Var, Param)):
        return e.name, _LVL_ATOM
    if isinstance(e, Call):
        return f"{e.func}({_at(e.arg, _LVL_ADD)})", _LVL_ATOM
    if isinstance(e, Neg):
        return "-" + _at(e.arg, _LVL_POW), _LVL_UNARY
    if isinstance(e, Add):
        return f"{_at(e.left, _LVL_ADD)} + {_at(e.right, _LVL_MUL)}", _LVL_ADD
    if isinstance(e, Sub):
        return f"{_at(e.left, _LVL_ADD)} - {_at(e.right, _LVL_MUL)}", _LVL_ADD
    if isinstance(e, Mul):
        return f"{_at(e.left, _LVL_MUL)}*{_at(e.right, _LVL_UNARY)}", _LVL_MUL
    if isinstance(e, Div):
        return f"{_at(e.left, _LVL_MUL)}/{_at(e.right, _LVL_UNARY)}", _LVL_MUL
    if isinstance(e, Pow):
        return f"{_at(e.base, _LVL_ATOM)}^{_at(e.exponent, _LVL_UNARY)}", _LVL_POW
    raise TypeError(f"not an expression node: {e!r}")


def _at(e: Expr, min_level: int) -> str:
    text, level = _src(e)
    if level < min_level:
        return f"({text})"
    return text


def to_source(e: Expr) -> str:
    """Render an AST back to parseable source text."""
    return _src(e)[0]


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class Bindings:
    """Point at which to evaluate: time, space coordinates, parameter values."""

    t: float = 0.0
    x: tuple = ()
    params: Mapping[str, float] = None

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(self.x))
        object.__setattr__(self, "params", dict(self.params or {}))


def evaluate(e: Expr, b: Bindings) -> complex:
    """Evaluate at a point.  Raises ExprEvalError on unbound symbols,
    division by zero, or log of zero."""
    memo = {}

    def ev(node):
        key = id(node)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(node, Num):
            val = node.value
        elif isinstance(node, ImagUnit):
            val = 1j
        elif isinstance(node, Var):
            if node.name == "t":
                val = complex(b.t)
            else:
                k = int(node.name[1:])
                if k < 1 or k > len(b.x):
                    raise ExprEvalError(f"unbound variable {node.name}")
                val = complex(b.x[k - 1])
        elif isinstance(node, Param):
            if node.name not in b.params:
                raise ExprEvalError(f"unbound parameter {node.name!r}")
            val = complex(b.params[node.name])
        elif isinstance(node, Neg):
            val = -ev(node.arg)
        elif isinstance(node, Add):
            val = ev(node.left) + ev(node.right)
        elif isinstance(node, Sub):
            val = ev(node.left) - ev(node.right)
        elif isinstance(node, Mul):
            val = ev(node.left) * ev(node.right)
        elif isinstance(node, Div):
            den = ev(node.right)
            if den == 0:
                raise ExprEvalError("division by zero")
            val = ev(node.left) / den
        elif isinstance(node, Pow):
            base, expo = ev(node.base), ev(node.exponent)
            try:
                val = base**expo
            except ZeroDivisionError:
                raise ExprEvalError("zero raised to a negative power") from None
        elif isinstance(node, Call):
            arg = ev(node.arg)
            if node.func == "abs":
                val = complex(abs(arg))
            elif node.func == "log":
                if arg == 0:
                    raise ExprEvalError("log of zero")
                val = cmath.log(arg)
            else:
                val = getattr(cmath, node.func)(arg)
        else:
            raise TypeError(f"not an expression node: {node!r}")
        memo[key] = val
        return val

    return ev(e)


def eval_on_grid(e: Expr, t: float, x_arrays: Sequence[np.ndarray], params=None) -> np.ndarray:
    """Vectorised evaluation: x_arrays[k] holds the x_{k+1} coordinates
    (broadcastable numpy arrays).  Returns a complex128 array."""
    params = params or {}
    shape = np.broadcast(*x_arrays).shape if x_arrays else ()
    memo = {}

    def ev(node):
        key = id(node)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(node, Num):
            val = np.complex128(node.value)
        elif isinstance(node, ImagUnit):
            val = np.complex128(1j)
        elif isinstance(node, Var):
            if node.name == "t":
                val = np.complex128(t)
            else:
                k = int(node.name[1:])
                if k < 1 or k > len(x_arrays):
                    raise ExprEvalError(f"unbound variable {node.name}")
                val = np.asarray(x_arrays[k - 1], dtype=np.complex128)
        elif isinstance(node, Param):
            if node.name not in params:
                raise ExprEvalError(f"unbound parameter {node.name!r}")
            val = np.complex128(params[node.name])
        elif isinstance(node, Neg):
            val = -ev(node.arg)
        elif isinstance(node, Add):
            val = ev(node.left) + ev(node.right)
        elif isinstance(node, Sub):
            val = ev(node.left) - ev(node.right)
        elif isinstance(node, Mul):
            val = ev(node.left) * ev(node.right)
        elif isinstance(node, Div):
            den = ev(node.right)
            if np.any(den == 0):
                raise ExprEvalError("division by zero")
            val = ev(node.left) / den
        elif isinstance(node, Pow):
            val = ev(node.base) ** ev(node.exponent)
            if not np.all(np.isfinite(val)):
                raise ExprEvalError("non-finite power result")
        elif isinstance(node, Call):
            arg = ev(node.arg)
            if node.func == "abs":
                val = np.abs(arg).astype(np.complex128)
            elif node.func == "log":
                if np.any(arg == 0):
                    raise ExprEvalError("log of zero")
                val = np.log(arg)
            else:
                val = getattr(np, node.func)(arg)
        else:
            raise TypeError(f"not an expression node: {node!r}")
        memo[key] = val
        return val

    result = ev(e)
    return np.broadcast_to(np.asarray(result, dtype=np.complex128), shape).copy() if shape else result


# ---------------------------------------------------------------------------
# Structural queries


def depends_on_t(e: Expr) -> bool:
    if isinstance(e, Var):
        return e.name == "t"
    if isinstance(e, (Num, ImagUnit, Param)):
        return False
    if isinstance(e, Neg):
        return depends_on_t(e.arg)
    if isinstance(e, Call):
        return depends_on_t(e.arg)
    if isinstance(e, Pow):
        return depends_on_t(e.base) or depends_on_t(e.exponent)
    return depends_on_t(e.left) or depends_on_t(e.right)


def x_indices(e: Expr) -> set:
    """Set of space-variable indices used (x3 contributes 3)."""
    out = set()

    def walk(node):
        if isinstance(node, Var) and node.name != "t":
            out.add(int(node.name[1:]))
        elif isinstance(node, Neg):
            walk(node.arg)
        elif isinstance(node, Call):
            walk(node.arg)
        elif isinstance(node, Pow):
            walk(node.base)
            walk(node.exponent)
        elif isinstance(node, (Add, Sub, Mul, Div)):
            walk(node.left)
            walk(node.right)

    walk(e)
    return out


def param_names(e: Expr) -> set:
    out = set()

    def walk(node):
        if isinstance(node, Param):
            out.add(node.name)
        elif isinstance(node, Neg):
            walk(node.arg)
        elif isinstance(node, Call):
            walk(node.arg)
        elif isinstance(node, Pow):
            walk(node.base)
            walk(node.exponent)
        elif isinstance(node, (Add, Sub, Mul, Div)):
            walk(node.left)
            walk(node.right)

    walk(e)
    return out


# ---------------------------------------------------------------------------
# Symbolic differentiation in t


def d_dt(e: Expr) -> Expr:
    """Symbolic partial derivative in t.

    Any subtree free of t differentiates to the literal zero.  abs is
    rejected only when it sits inside a t-dependent subtree; an exponent
    may depend on t only over a t-independent base (a^u) and vice versa.
    """
    if not depends_on_t(e):
        return ZERO
    if isinstance(e, Var):
        # depends_on_t already established this is t itself
        return ONE
    if isinstance(e, Neg):
        return neg_e(d_dt(e.arg))
    if isinstance(e, Add):
        return add_e(d_dt(e.left), d_dt(e.right))
    if isinstance(e, Sub):
        return sub_e(d_dt(e.left), d_dt(e.right))
    if isinstance(e, Mul):
        return add_e(mul_e(d_dt(e.left), e.right), mul_e(e.left, d_dt(e.right)))
    if isinstance(e, Div):
        num = sub_e(mul_e(d_dt(e.left), e.right), mul_e(e.left, d_dt(e.right)))
        return div_e(num, mul_e(e.right, e.right))
    if isinstance(e, Pow):
        base_dep = depends_on_t(e.base)
        expo_dep = depends_on_t(e.exponent)
        if base_dep and expo_dep:
            raise ExprDiffError("cannot differentiate u^v with both u and v depending on t")
        if base_dep:
            # d/dt u^c = c * u^(c-1) * u'
            if isinstance(e.exponent, Num):
                new_exp = Num(e.exponent.value - 1)
            else:
                new_exp = sub_e(e.exponent, ONE)
            return mul_e(mul_e(e.exponent, Pow(e.base, new_exp)), d_dt(e.base))
        # d/dt a^u = a^u * log(a) * u'
        return mul_e(mul_e(e, Call("log", e.base)), d_dt(e.exponent))
    if isinstance(e, Call):
        u, du = e.arg, d_dt(e.arg)
        if e.func == "sin":
            return mul_e(Call("cos", u), du)
        if e.func == "cos":
            return mul_e(neg_e(Call("sin", u)), du)
        if e.func == "exp":
            return mul_e(e, du)
        if e.func == "sqrt":
            return div_e(du, mul_e(Num(2.0), Call("sqrt", u)))
        if e.func == "log":
            return div_e(du, u)
        if e.func == "abs":
            raise ExprDiffError("abs is not differentiable on a t-dependent subtree")
    raise TypeError(f"not an expression node: {e!r}")
