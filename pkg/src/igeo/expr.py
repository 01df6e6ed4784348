"""Scalar fields over chart coordinates.

Expressions are parsed into small immutable trees and evaluated with
second-order forward-mode jets, so every value comes with its exact gradient
and Hessian.  A symbolic differentiator over the same node set lets builders
materialize derived fields (metrics from potentials, cubic forms) as trees.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := NUMBER | COORD | FUNC '(' expr ')' | '(' expr ')' | 'pi' | 'e'

Coordinates are named ``t1 .. tn`` (1-based).  ``#`` starts a line comment.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "ParseError",
    "DomainError",
    "Num",
    "Coord",
    "Neg",
    "BinOp",
    "Call",
    "ScalarField",
    "Jet2",
    "parse",
    "eval_jet2",
    "eval_value",
    "diff",
    "to_text",
    "constant",
    "coordinate",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh")


class ParseError(ValueError):
    """Syntax or binding error; ``offset`` is the UTF-8 byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class DomainError(ArithmeticError):
    """Evaluation left the domain of a function (log of a nonpositive, ...)."""

    def __init__(self, message: str, subexpr: str, point_index=None):
        where = "" if point_index is None else f" at point {point_index}"
        super().__init__(f"{message} in '{subexpr}'{where}")
        self.subexpr = subexpr
        self.point_index = point_index


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Coord:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Coord, Neg, BinOp, Call]


@dataclass(frozen=True)
class ScalarField:
    """An expression tree bound to a chart of dimension ``dim``."""

    root: Node
    dim: int

    def __str__(self) -> str:
        return to_text(self.root)

    def __call__(self, p) -> "Jet2":
        return eval_jet2(self, p)

    @property
    def is_zero(self) -> bool:
        return isinstance(self.root, Num) and self.root.value == 0.0


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)
_COORD = re.compile(r"t([1-9][0-9]*)")


def _byte_offset(text: str, i: int) -> int:
    return len(text[:i].encode("utf-8"))


def _tokenize(text: str):
    tokens = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", _byte_offset(text, i))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), _byte_offset(text, i)))
        i = m.end()
    tokens.append(("end", "", _byte_offset(text, len(text))))
    return tokens


class _Parser:
    def __init__(self, text: str, dim: int):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.dim = dim

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, text, off = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", off)

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Node:
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text == "pi":
                return Num(math.pi)
            if text == "e":
                return Num(math.e)
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            m = _COORD.fullmatch(text)
            if m is None:
                raise ParseError(f"unknown identifier {text!r}", off)
            index = int(m.group(1))
            if index > self.dim:
                raise ParseError(
                    f"coordinate index out of range: {text} with dim {self.dim}", off
                )
            return Coord(index)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {found}", off)


def parse(text: str, dim: int) -> ScalarField:
    """Parse ``text`` into a field over coordinates ``t1..t<dim>``.

    >>> str(parse("1 / t2^2", 2))
    '1 / t2^2'
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    parser = _Parser(text, dim)
    root = parser.expr()
    kind, tok, off = parser.peek()
    if kind != "end":
        raise ParseError(f"unexpected {tok!r}", off)
    return ScalarField(root, dim)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg) or isinstance(node, Num) and math.copysign(1.0, node.value) < 0:
        return _PREC["neg"]
    return _PREC["atom"]


def _wrap(node: Node, min_prec: int) -> str:
    text = to_text(node)
    return f"({text})" if _prec(node) < min_prec else text


def to_text(node: Node) -> str:
    """Minimal-parenthesis text; reparsing evaluates identically.

    Negative literals print as a unary minus applied to a literal, which
    evaluates to the same float.
    """
    if isinstance(node, Num):
        v = float(node.value)
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    if isinstance(node, Coord):
        return f"t{node.index}"
    if isinstance(node, Neg):
        return "-" + _wrap(node.arg, _PREC["neg"])
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    p = _PREC[node.op]
    if node.op == "^":
        return f"{_wrap(node.left, _PREC['atom'])}^{_wrap(node.right, _PREC['neg'])}"
    return f"{_wrap(node.left, p)} {node.op} {_wrap(node.right, p + 1)}"


# ---------------------------------------------------------------------------
# Jets
# ---------------------------------------------------------------------------


class Jet2:
    """Value, gradient and Hessian of a scalar, possibly batched over points.

    ``value`` has shape ``B``; ``grad`` has shape ``B + (n,)``; ``hess`` has
    shape ``B + (n, n)``.  The Hessian stays exactly symmetric because every
    update adds either a symmetric term or an outer product paired with its
    transpose.  Truncated jets carry ``None`` for the parts not tracked
    (``hess`` at order 1, both ``grad`` and ``hess`` at order 0).
    """

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = value
        self.grad = grad
        self.hess = hess

    def __repr__(self):
        return f"Jet2(value={self.value!r}, grad={self.grad!r}, hess={self.hess!r})"

    @classmethod
    def constant(cls, c: float, batch: tuple, n: int, order: int = 2) -> "Jet2":
        return cls(
            np.full(batch, float(c)),
            np.zeros(batch + (n,)) if order >= 1 else None,
            np.zeros(batch + (n, n)) if order >= 2 else None,
        )

    @classmethod
    def variable(cls, p: np.ndarray, index: int, order: int = 2) -> "Jet2":
        batch, n = p.shape[:-1], p.shape[-1]
        grad = None
        if order >= 1:
            grad = np.zeros(batch + (n,))
            grad[..., index] = 1.0
        hess = np.zeros(batch + (n, n)) if order >= 2 else None
        return cls(p[..., index].copy(), grad, hess)

    def _sym_outer(self, other: "Jet2") -> np.ndarray:
        o = self.grad[..., :, None] * other.grad[..., None, :]
        return o + np.swapaxes(o, -1, -2)

    def shift(self, c: float) -> "Jet2":
        return Jet2(self.value + c, self.grad, self.hess)

    def scale(self, c) -> "Jet2":
        cv = np.asarray(c)
        return Jet2(
            self.value * c,
            None if self.grad is None else self.grad * cv[..., None],
            None if self.hess is None else self.hess * cv[..., None, None],
        )

    def add(self, other: "Jet2", sign: float = 1.0) -> "Jet2":
        def comb(x, y):
            if x is None:
                return None
            return x + y if sign > 0 else x - y

        return Jet2(comb(self.value, other.value), comb(self.grad, other.grad), comb(self.hess, other.hess))

    def mul(self, other: "Jet2") -> "Jet2":
        a, b = self.value, other.value
        grad = hess = None
        if self.grad is not None:
            grad = self.grad * b[..., None] + other.grad * a[..., None]
        if self.hess is not None:
            hess = (
                self.hess * b[..., None, None]
                + other.hess * a[..., None, None]
                + self._sym_outer(other)
            )
        return Jet2(a * b, grad, hess)

    def compose(self, f0, f1, f2) -> "Jet2":
        """Chain rule for ``phi(self)`` given phi, phi', phi'' at the value."""
        g = self.grad
        if g is None:
            return Jet2(f0, None, None)
        hess = None
        if self.hess is not None:
            hess = self.hess * f1[..., None, None] + (g[..., :, None] * g[..., None, :]) * f2[..., None, None]
        return Jet2(f0, g * f1[..., None], hess)


def _as_points(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    return arr


def _bad(mask) -> int | None:
    idx = np.flatnonzero(np.atleast_1d(mask))
    return int(idx[0]) if idx.size else None


def _check(mask, message: str, node: Node, batched: bool):
    bad = _bad(mask)
    if bad is not None:
        raise DomainError(message, to_text(node), bad if batched else None)


def _const_value(node: Node):
    """Value of a coordinate-free subtree, or None."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Coord):
        return None
    if isinstance(node, Neg):
        v = _const_value(node.arg)
        return None if v is None else -v
    return None


def _integer_exponent(c: float) -> bool:
    return float(c).is_integer() and abs(c) < 2**31


class _JetEvaluator:
    def __init__(self, p: np.ndarray, order: int = 2):
        self.p = p
        self.order = order
        self.batch = p.shape[:-1]
        self.n = p.shape[-1]
        self.batched = p.ndim > 1
        self._coords = {}

    def const(self, c: float) -> Jet2:
        return Jet2.constant(c, self.batch, self.n, self.order)

    def ev(self, node: Node):
        """Returns a Jet2, or a plain float for coordinate-free subtrees."""
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Coord):
            jet = self._coords.get(node.index)
            if jet is None:
                jet = self._coords[node.index] = Jet2.variable(self.p, node.index - 1, self.order)
            return jet
        if isinstance(node, Neg):
            a = self.ev(node.arg)
            return -a if isinstance(a, float) else a.scale(-1.0)
        if isinstance(node, Call):
            return self.call(node, self.ev(node.arg))
        return self.binop(node, self.ev(node.left), self.ev(node.right))

    def call(self, node: Call, a):
        f = node.func
        if isinstance(a, float):
            return self._scalar_call(node, a)
        u = a.value
        if f == "sin":
            s, c = np.sin(u), np.cos(u)
            return a.compose(s, c, -s)
        if f == "cos":
            s, c = np.sin(u), np.cos(u)
            return a.compose(c, -s, -c)
        if f == "tan":
            c = np.cos(u)
            _check(np.abs(c) < 1e-300, "tan pole", node, self.batched)
            t = np.tan(u)
            sec2 = 1.0 + t * t
            return a.compose(t, sec2, 2.0 * t * sec2)
        if f == "exp":
            e = np.exp(u)
            return a.compose(e, e, e)
        if f == "log":
            _check(u <= 0, "log of nonpositive value", node, self.batched)
            return a.compose(np.log(u), 1.0 / u, -1.0 / (u * u))
        if f == "sqrt":
            _check(u <= 0, "sqrt of nonpositive value", node, self.batched)
            r = np.sqrt(u)
            return a.compose(r, 0.5 / r, -0.25 / (r * u))
        if f == "sinh":
            s, c = np.sinh(u), np.cosh(u)
            return a.compose(s, c, s)
        if f == "cosh":
            s, c = np.sinh(u), np.cosh(u)
            return a.compose(c, s, c)
        if f == "tanh":
            t = np.tanh(u)
            d = 1.0 - t * t
            return a.compose(t, d, -2.0 * t * d)
        raise ValueError(f"unknown function {f}")  # pragma: no cover

    def _scalar_call(self, node: Call, x: float) -> float:
        f = node.func
        if f == "log" and x <= 0 or f == "sqrt" and x < 0:
            raise DomainError(f"{f} of invalid value", to_text(node))
        return float(getattr(math, f)(x))

    def binop(self, node: BinOp, a, b):
        op = node.op
        a_const, b_const = isinstance(a, float), isinstance(b, float)
        if a_const and b_const:
            return self._scalar_binop(node, a, b)
        if op == "+":
            if a_const:
                a, b = b, a
            if isinstance(b, float):
                return a.shift(b)
            return a.add(b)
        if op == "-":
            if b_const:
                return a.shift(-b)
            if a_const:
                return b.scale(-1.0).shift(a)
            return a.add(b, -1.0)
        if op == "*":
            if a_const:
                return b.scale(a)
            if b_const:
                return a.scale(b)
            return a.mul(b)
        if op == "/":
            if b_const:
                if b == 0.0:
                    raise DomainError("division by zero", to_text(node))
                return a.scale(1.0 / b)
            v = b.value
            _check(v == 0, "division by zero", node, self.batched)
            inv = b.compose(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
            return inv.scale(a) if a_const else a.mul(inv)
        # op == "^"
        if b_const:
            return self._power_const(node, a, b)
        # general power u^v = exp(v log u)
        if a_const:
            if a <= 0:
                raise DomainError("non-constant exponent of nonpositive base", to_text(node))
            e = np.exp(b.value * math.log(a))
            la = math.log(a)
            return b.compose(e, e * la, e * la * la)
        _check(a.value <= 0, "non-constant exponent of nonpositive base", node, self.batched)
        logu = a.compose(np.log(a.value), 1.0 / a.value, -1.0 / (a.value * a.value))
        w = logu.mul(b)
        e = np.exp(w.value)
        return w.compose(e, e, e)

    def _power_const(self, node: BinOp, a: Jet2, c: float) -> Jet2:
        u = a.value
        if c == 0.0:
            return self.const(1.0)
        if c == 1.0:
            return a
        if _integer_exponent(c):
            k = int(c)
            if k < 0:
                _check(u == 0, "division by zero", node, self.batched)
            # u**0 is exactly 1, so k = 2 keeps polynomial Hessians exact
            return a.compose(u**k, k * u ** (k - 1), k * (k - 1) * u ** (k - 2))
        _check(u <= 0, "non-integer power of nonpositive value", node, self.batched)
        f0 = u**c
        return a.compose(f0, c * f0 / u, c * (c - 1.0) * f0 / (u * u))

    def _scalar_binop(self, node: BinOp, a: float, b: float) -> float:
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise DomainError("division by zero", to_text(node))
            return a / b
        if a < 0 and not _integer_exponent(b) or a == 0 and b < 0:
            raise DomainError("invalid power", to_text(node))
        return float(a**b)


def eval_jet2(f: ScalarField, p, order: int = 2) -> Jet2:
    """Exact value, gradient and Hessian of ``f`` at ``p``.

    ``p`` may be a single point of shape ``(n,)`` or a batch ``(..., n)``;
    the jet arrays carry the same leading batch shape.  ``order`` 1 or 0
    skips the Hessian, or both derivatives.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    pts = _as_points(p)
    if pts.shape[-1] != f.dim:
        raise ValueError(f"point has {pts.shape[-1]} coordinates, field expects {f.dim}")
    ev = _JetEvaluator(pts, order)
    with np.errstate(all="ignore"):
        out = ev.ev(f.root)
    if isinstance(out, float):
        return ev.const(out)
    return Jet2(np.array(out.value, dtype=float), out.grad, out.hess)


def eval_value(f: ScalarField, p) -> np.ndarray:
    return eval_jet2(f, p, order=0).value


# ---------------------------------------------------------------------------
# Construction helpers with light constant folding
# ---------------------------------------------------------------------------


def constant(c: float) -> Node:
    return Num(float(c))


def coordinate(i: int) -> Node:
    return Coord(i)


def _is(node: Node, v: float) -> bool:
    return isinstance(node, Num) and node.value == v


def add(a: Node, b: Node) -> Node:
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def sub(a: Node, b: Node) -> Node:
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def neg(a: Node) -> Node:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a: Node, b: Node) -> Node:
    if _is(a, 0.0) or _is(b, 0.0):
        return Num(0.0)
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def div(a: Node, b: Node) -> Node:
    if _is(a, 0.0):
        return Num(0.0)
    if _is(b, 1.0):
        return a
    return BinOp("/", a, b)


def power(a: Node, b: Node) -> Node:
    if _is(b, 0.0):
        return Num(1.0)
    if _is(b, 1.0):
        return a
    return BinOp("^", a, b)


def call(func: str, a: Node) -> Node:
    return Call(func, a)


def sum_nodes(nodes) -> Node:
    out: Node = Num(0.0)
    for node in nodes:
        out = add(out, node)
    return out


# ---------------------------------------------------------------------------
# Symbolic differentiation
# ---------------------------------------------------------------------------


def _d(node: Node, i: int) -> Node:
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Coord):
        return Num(1.0 if node.index == i else 0.0)
    if isinstance(node, Neg):
        return neg(_d(node.arg, i))
    if isinstance(node, Call):
        u, du = node.arg, _d(node.arg, i)
        if _is(du, 0.0):
            return Num(0.0)
        f = node.func
        if f == "sin":
            outer = call("cos", u)
        elif f == "cos":
            outer = neg(call("sin", u))
        elif f == "tan":
            outer = add(Num(1.0), power(call("tan", u), Num(2.0)))
        elif f == "exp":
            outer = node
        elif f == "log":
            return div(du, u)
        elif f == "sqrt":
            return div(du, mul(Num(2.0), node))
        elif f == "sinh":
            outer = call("cosh", u)
        elif f == "cosh":
            outer = call("sinh", u)
        else:  # tanh
            outer = sub(Num(1.0), power(node, Num(2.0)))
        return mul(outer, du)
    a, b = node.left, node.right
    da, db = _d(a, i), _d(b, i)
    op = node.op
    if op == "+":
        return add(da, db)
    if op == "-":
        return sub(da, db)
    if op == "*":
        return add(mul(da, b), mul(a, db))
    if op == "/":
        if _is(db, 0.0):
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, Num(2.0)))
    # power
    c = _const_value(b)
    if c is not None:
        if _is(da, 0.0):
            return Num(0.0)
        return mul(mul(Num(c), power(a, Num(c - 1.0))), da)
    # d(a^b) = a^b * (db*log(a) + b*da/a)
    inner = add(mul(db, call("log", a)), div(mul(b, da), a))
    return mul(node, inner)


def diff(f: ScalarField, i: int) -> ScalarField:
    """Symbolic partial derivative with respect to coordinate ``t<i>`` (1-based)."""
    if not 1 <= i <= f.dim:
        raise ValueError(f"coordinate index {i} out of range for dim {f.dim}")
    return ScalarField(_d(f.root, i), f.dim)
