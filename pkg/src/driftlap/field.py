"""Scalar fields given as closed-form expressions in x, y, z.

Fields supply the weight and potential terms of the operator.  They are
parsed into a small AST that supports vectorized evaluation at mesh
vertices and exact symbolic differentiation, so gradients never rely on
finite differences.  A field carries its ambient dimension (2 or 3); on
surfaces embedded in 3-space, fields are restrictions of ambient
functions, which avoids any chart machinery.

Grammar (usual precedence, ^ binds tightest and is right-associative):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'x' | 'y' | 'z' | NAME '(' expr ')' | '(' expr ')'

Exponents must fold to a constant; general f^g is not supported.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np


class FieldError(ValueError):
    """Raised for syntax errors and invalid evaluations."""


VARIABLES = ("x", "y", "z")

FUNCTIONS = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "log": np.log,
}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


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
    fn: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]


# -- tokenizer / parser -------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise FieldError(
                f"unexpected character {rest[0]!r} at position "
                f"{len(text) - len(rest)}")
        if m.lastgroup is not None:
            tokens.append(
                (m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise FieldError(
                f"unexpected end of expression at position {len(self.text)}")
        self.i += 1
        return tok

    def expect_op(self, op: str):
        tok = self.take()
        if tok[0] != "op" or tok[1] != op:
            raise FieldError(
                f"expected {op!r} at position {tok[2]}, found {tok[1]!r}")

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise FieldError(
                f"trailing input at position {tok[2]}: {self.text[tok[2]:]!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while (tok := self.peek()) and tok[0] == "op" and tok[1] in "+-":
            self.take()
            node = BinOp(tok[1], node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while (tok := self.peek()) and tok[0] == "op" and tok[1] in "*/":
            self.take()
            node = BinOp(tok[1], node, self.unary())
        return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == "^":
            self.take()
            exponent = self.unary()
            const = _fold_constant(exponent)
            if const is None:
                raise FieldError(
                    f"exponent at position {tok[2]} must be constant")
            return BinOp("^", base, Num(const))
        return base

    def atom(self) -> Node:
        kind, value, pos = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value in VARIABLES:
                if VARIABLES.index(value) >= self.dim:
                    raise FieldError(
                        f"variable {value!r} at position {pos} is undefined "
                        f"in dimension {self.dim}")
                return Var(value)
            if value in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            raise FieldError(f"unknown name {value!r} at position {pos}")
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise FieldError(f"unexpected token {value!r} at position {pos}")


def _fold_constant(node: Node):
    """Value of a constant subtree, or None if it involves a variable."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Neg):
        v = _fold_constant(node.arg)
        return None if v is None else -v
    if isinstance(node, BinOp):
        a, b = _fold_constant(node.left), _fold_constant(node.right)
        if a is None or b is None:
            return None
        try:
            return _apply_binop(node.op, a, b)
        except ZeroDivisionError:
            raise FieldError("division by zero in constant expression")
    if isinstance(node, Call):
        v = _fold_constant(node.arg)
        if v is None:
            return None
        out = FUNCTIONS[node.fn](v)
        if not np.isfinite(out):
            raise FieldError(f"{node.fn} of {v} is not finite")
        return float(out)
    return None


def _apply_binop(op, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    return a**b


# -- simplification -----------------------------------------------------------


def _simplify(node: Node) -> Node:
    if isinstance(node, (Num, Var)):
        return node
    if isinstance(node, Neg):
        arg = _simplify(node.arg)
        if isinstance(arg, Num):
            return Num(-arg.value)
        if isinstance(arg, Neg):
            return arg.arg
        return Neg(arg)
    if isinstance(node, Call):
        arg = _simplify(node.arg)
        if isinstance(arg, Num):
            with np.errstate(all="ignore"):
                v = float(FUNCTIONS[node.fn](arg.value))
            # keep the call unfolded if the value is not representable
            if math.isfinite(v):
                return Num(v)
        return Call(node.fn, arg)

    left, right = _simplify(node.left), _simplify(node.right)
    op = node.op
    if isinstance(left, Num) and isinstance(right, Num):
        try:
            v = _apply_binop(op, left.value, right.value)
        except ZeroDivisionError:
            raise FieldError("division by zero in constant expression")
        except OverflowError:
            v = math.inf
        if math.isfinite(v):
            return Num(v)
    if op == "+":
        if _is_zero(left):
            return right
        if _is_zero(right):
            return left
    elif op == "-":
        if _is_zero(right):
            return left
        if _is_zero(left):
            return Neg(right)
    elif op == "*":
        if _is_zero(left) or _is_zero(right):
            return Num(0.0)
        if _is_one(left):
            return right
        if _is_one(right):
            return left
    elif op == "/":
        if _is_zero(left):
            return Num(0.0)
        if _is_one(right):
            return left
    elif op == "^":
        if _is_one(right):
            return left
        if _is_zero(right):
            return Num(1.0)
    return BinOp(op, left, right)


def _is_zero(node: Node) -> bool:
    return isinstance(node, Num) and node.value == 0.0


def _is_one(node: Node) -> bool:
    return isinstance(node, Num) and node.value == 1.0


# -- differentiation ----------------------------------------------------------


def _diff(node: Node, var: str) -> Node:
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0 if node.name == var else 0.0)
    if isinstance(node, Neg):
        return Neg(_diff(node.arg, var))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        da, db = _diff(a, var), _diff(b, var)
        if node.op == "+":
            return BinOp("+", da, db)
        if node.op == "-":
            return BinOp("-", da, db)
        if node.op == "*":
            return BinOp("+", BinOp("*", da, b), BinOp("*", a, db))
        if node.op == "/":
            num = BinOp("-", BinOp("*", da, b), BinOp("*", a, db))
            return BinOp("/", num, BinOp("^", b, Num(2.0)))
        # ^ with constant exponent c: c * a^(c-1) * da
        c = node.right.value
        return BinOp("*", BinOp("*", Num(c), BinOp("^", a, Num(c - 1.0))), da)
    if isinstance(node, Call):
        da = _diff(node.arg, var)
        a = node.arg
        if node.fn == "exp":
            outer = Call("exp", a)
        elif node.fn == "sin":
            outer = Call("cos", a)
        elif node.fn == "cos":
            outer = Neg(Call("sin", a))
        elif node.fn == "sqrt":
            return BinOp("/", da, BinOp("*", Num(2.0), Call("sqrt", a)))
        else:  # log
            return BinOp("/", da, a)
        return BinOp("*", outer, da)
    raise TypeError(f"unknown node {node!r}")


# -- printing -----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _unparse(node: Node, parent: int = 0) -> str:
    """Minimal-parentheses form; `parent` is the precedence floor below
    which this subtree must be wrapped to reparse with the same shape."""
    if isinstance(node, Num):
        v = node.value
        if v < 0:
            return _unparse(Neg(Num(-v)), parent)
        return str(int(v)) if v == int(v) and abs(v) < 1e16 else repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({_unparse(node.arg)})"
    if isinstance(node, Neg):
        text = f"-{_unparse(node.arg, 3)}"
        return f"({text})" if parent > 3 else text
    prec = _PREC[node.op]
    if node.op == "^":
        # right-associative: a ^ child on the left must keep its parens
        left = _unparse(node.left, 5)
        right = _unparse(node.right, 4)
        text = f"{left}^{right}"
    else:
        left = _unparse(node.left, prec)
        # - and / are left-associative: equal precedence on the right
        # changes meaning, so bump the floor there
        right = _unparse(node.right, prec + 1 if node.op in "-/" else prec)
        text = f"{left} {node.op} {right}"
    return f"({text})" if prec < parent else text


# -- public wrapper -----------------------------------------------------------


class ScalarField:
    """A scalar function of position with exact symbolic gradient."""

    def __init__(self, node: Node, dim: int = 2):
        if dim not in (2, 3):
            raise FieldError("dimension must be 2 or 3")
        self._node = _simplify(node)
        self.dimension = dim

    @classmethod
    def parse(cls, text: str, dim: int = 2) -> "ScalarField":
        return cls(_Parser(text, dim).parse(), dim)

    def evaluate(self, points) -> np.ndarray:
        """Evaluate at each row of an (N, dimension) array."""
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != self.dimension:
            raise FieldError(
                f"points must be (N, {self.dimension}) for this field")
        env = {name: points[:, k]
               for k, name in enumerate(VARIABLES[: self.dimension])}
        out = self._eval(self._node, env)
        if np.isscalar(out) or np.ndim(out) == 0:
            out = np.full(len(points), float(out))
        return out

    def _eval(self, node: Node, env):
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Var):
            return env[node.name]
        if isinstance(node, Neg):
            return -self._eval(node.arg, env)
        if isinstance(node, Call):
            arg = self._eval(node.arg, env)
            if node.fn == "log" and np.any(arg <= 0):
                raise FieldError("log of a nonpositive value")
            if node.fn == "sqrt" and np.any(arg < 0):
                raise FieldError("sqrt of a negative value")
            return FUNCTIONS[node.fn](arg)
        a = self._eval(node.left, env)
        b = self._eval(node.right, env)
        if node.op == "/" and np.any(b == 0):
            raise FieldError("division by zero during evaluation")
        return _apply_binop(node.op, a, b)

    __call__ = evaluate

    def eval_at(self, point) -> float:
        return float(self.evaluate(np.atleast_2d(point))[0])

    def partial(self, var: str) -> "ScalarField":
        if var not in VARIABLES[: self.dimension]:
            raise FieldError(
                f"unknown variable {var!r} in dimension {self.dimension}")
        return ScalarField(_diff(self._node, var), self.dimension)

    def gradient_fields(self) -> tuple:
        """Partial derivatives as fields, one per coordinate."""
        return tuple(self.partial(v) for v in VARIABLES[: self.dimension])

    def gradient(self, points) -> np.ndarray:
        """Exact gradient rows at each point, shape (N, dimension)."""
        return np.column_stack(
            [g.evaluate(points) for g in self.gradient_fields()])

    def grad_at(self, point) -> np.ndarray:
        return self.gradient(np.atleast_2d(point))[0]

    @property
    def is_constant(self) -> bool:
        return isinstance(self._node, Num)

    @property
    def constant_value(self) -> float:
        if not self.is_constant:
            raise FieldError("field is not constant")
        return self._node.value

    def __str__(self) -> str:
        return _unparse(self._node)

    def __repr__(self) -> str:
        return f"ScalarField({str(self)!r}, dim={self.dimension})"

    def __eq__(self, other) -> bool:
        return (isinstance(other, ScalarField)
                and self._node == other._node
                and self.dimension == other.dimension)

    def __hash__(self):
        return hash((self._node, self.dimension))


def parse(text: str, dim: int = 2) -> ScalarField:
    return ScalarField.parse(text, dim)


# -- builtin families ---------------------------------------------------------


def constant(value: float, dim: int = 2) -> ScalarField:
    return ScalarField(Num(float(value)), dim)


def zero(dim: int = 2) -> ScalarField:
    return constant(0.0, dim)


def linear(a: float, b: float) -> ScalarField:
    """a x + b y."""
    return parse(f"{float(a)!r}*x + {float(b)!r}*y", 2)


def radial_quadratic(c: float, dim: int = 2) -> ScalarField:
    """c (x^2 + y^2) / 2, extended with z^2 in dimension 3."""
    terms = " + ".join(f"{v}^2" for v in VARIABLES[:dim])
    return parse(f"{float(c)!r} / 2 * ({terms})", dim)


def gaussian_well(depth: float, sigma: float, center=(0.0, 0.0)) -> ScalarField:
    """-depth exp(-|p - center|^2 / sigma^2), a localized dip."""
    if sigma <= 0:
        raise FieldError("sigma must be positive")
    dim = len(center)
    if dim not in (2, 3):
        raise FieldError("center must have 2 or 3 coordinates")
    sq = " + ".join(
        f"({v} - {float(c)!r})^2" for v, c in zip(VARIABLES, center))
    return parse(
        f"-{float(depth)!r} * exp(-(({sq}) / {float(sigma**2)!r}))", dim)


BUILTIN_FAMILIES = {
    "constant": constant,
    "linear": linear,
    "radial_quadratic": radial_quadratic,
    "gaussian_well": gaussian_well,
}


def from_config(spec, dim: int = 2) -> ScalarField:
    """Build a field from config data.

    Accepts {"expr": "..."} or {"builtin": name, "params": {...}}; a bare
    string is treated as an expression, a number as a constant.
    """
    if isinstance(spec, ScalarField):
        return spec
    if isinstance(spec, (int, float)):
        return constant(float(spec), dim)
    if isinstance(spec, str):
        return parse(spec, dim)
    if isinstance(spec, dict):
        if "expr" in spec:
            return parse(spec["expr"], dim)
        if "builtin" in spec:
            name = spec["builtin"]
            if name not in BUILTIN_FAMILIES:
                raise FieldError(f"unknown builtin family {name!r}")
            params = dict(spec.get("params", {}))
            fn = BUILTIN_FAMILIES[name]
            if name in ("constant", "radial_quadratic"):
                params.setdefault("dim", dim)
            if name == "gaussian_well" and "center" not in params:
                params["center"] = (0.0,) * dim
            out = fn(**params)
            if out.dimension != dim:
                raise FieldError(
                    f"builtin {name!r} produced dimension {out.dimension}, "
                    f"expected {dim}")
            return out
    raise FieldError(f"cannot interpret field config {spec!r}")
