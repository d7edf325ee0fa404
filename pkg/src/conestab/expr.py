"""Arithmetic expressions over variables ``x1 .. xd``.

Grammar (lowest to highest precedence, binary operators left-associative)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' ['-'] INTEGER)*
    primary := NUMBER | VARIABLE | FUNC '(' expr ')' | '(' expr ')'

with ``FUNC`` one of ``abs sin cos sqrt``.  Errors carry the byte offset
of the offending token.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence, Union


class ExpressionError(ValueError):
    def __init__(self, message: str, offset: int | None = None):
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")
        self.offset = offset


class ExprSyntaxError(ExpressionError):
    pass


class UnknownIdentifierError(ExpressionError):
    pass


class ArityError(ExpressionError):
    pass


class EvaluationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg', 'abs', 'sin', 'cos', 'sqrt'
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # '+', '-', '*', '/', '^'
    left: "Node"
    right: "Node"


Node = Union[Num, Var, Unary, Binary]

FUNCTIONS = ("abs", "sin", "cos", "sqrt")

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    offset: int


def tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    raw = text.encode("utf-8")
    # offsets are byte offsets into the UTF-8 encoding
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            boff = len(text[:pos].encode("utf-8"))
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", boff)
        if m.lastgroup != "ws":
            boff = len(text[:pos].encode("utf-8"))
            toks.append(_Tok(m.lastgroup, m.group(), boff))
        pos = m.end()
    toks.append(_Tok("end", "", len(raw)))
    return toks


class _Parser:
    def __init__(self, text: str, dimension: int | None):
        self.toks = tokenize(text)
        self.i = 0
        self.dimension = dimension
        self.max_var = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.tok
        if t.text != text:
            found = repr(t.text) if t.kind != "end" else "end of input"
            raise ExprSyntaxError(f"expected {text!r}, found {found}", t.offset)
        return self.take()

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.tok.offset)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.text in ("+", "-"):
            op = self.take().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.take().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.text == "-":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Node:
        node = self.primary()
        while self.tok.text == "^":
            self.take()
            sign = 1
            if self.tok.text == "-":
                self.take()
                sign = -1
            t = self.tok
            if t.kind != "num" or not re.fullmatch(r"\d+", t.text):
                raise ExprSyntaxError("exponent must be an integer literal", t.offset)
            self.take()
            node = Binary("^", node, Num(float(sign * int(t.text))))
        return node

    def primary(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.take()
            value = float(t.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"number {t.text!r} out of range", t.offset)
            return Num(value)
        if t.kind == "ident":
            self.take()
            if t.text in FUNCTIONS:
                return self.call(t)
            m = re.fullmatch(r"x([1-9]\d*)", t.text)
            if m is None:
                raise UnknownIdentifierError(f"unknown identifier {t.text!r}", t.offset)
            index = int(m.group(1))
            if self.dimension is not None and index > self.dimension:
                raise UnknownIdentifierError(
                    f"unknown variable {t.text!r} for dimension {self.dimension}", t.offset
                )
            self.max_var = max(self.max_var, index)
            return Var(index)
        if t.text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        found = repr(t.text) if t.kind != "end" else "end of input"
        raise ExprSyntaxError(f"expected an operand, found {found}", t.offset)

    def call(self, name: _Tok) -> Node:
        self.expect("(")
        if self.tok.text == ")":
            raise ArityError(f"{name.text}() takes exactly one argument, got 0", name.offset)
        args = [self.expr()]
        while self.tok.text == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if len(args) != 1:
            raise ArityError(
                f"{name.text}() takes exactly one argument, got {len(args)}", name.offset
            )
        return Unary(name.text, args[0])


def _pow(x: float, n: int) -> float:
    if x == 0.0 and n < 0:
        raise EvaluationError("zero raised to a negative power")
    try:
        return x**n
    except OverflowError:
        return math.inf if (n % 2 == 0 or x > 0) else -math.inf


def _div(x: float, y: float) -> float:
    if y == 0.0:
        raise EvaluationError("division by zero")
    return x / y


def _sqrt(x: float) -> float:
    if x < 0:
        raise EvaluationError(f"square root of negative number {x!r}")
    return math.sqrt(x)


UNARY_FUNCS: dict[str, Callable[[float], float]] = {
    "neg": lambda x: -x,
    "abs": abs,
    "sin": math.sin,
    "cos": math.cos,
    "sqrt": _sqrt,
}

BINARY_FUNCS: dict[str, Callable[[float, float], float]] = {
    "+": lambda x, y: x + y,
    "-": lambda x, y: x - y,
    "*": lambda x, y: x * y,
    "/": _div,
}


def _compile(node: Node) -> Callable[[Sequence[float]], float]:
    if isinstance(node, Num):
        value = node.value
        return lambda x: value
    if isinstance(node, Var):
        i = node.index - 1
        return lambda x: x[i]
    if isinstance(node, Unary):
        fn, inner = UNARY_FUNCS[node.op], _compile(node.operand)
        return lambda x: fn(inner(x))
    if node.op == "^":
        n = int(node.right.value)
        base = _compile(node.left)
        return lambda x: _pow(base(x), n)
    fn, left, right = BINARY_FUNCS[node.op], _compile(node.left), _compile(node.right)
    return lambda x: fn(left(x), right(x))


def pretty(node: Node) -> str:
    """Fully parenthesised source text that parses back to ``node``."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Unary):
        inner = pretty(node.operand)
        return f"(-{inner})" if node.op == "neg" else f"{node.op}({inner})"
    if node.op == "^":
        return f"({pretty(node.left)} ^ {int(node.right.value)})"
    return f"({pretty(node.left)} {node.op} {pretty(node.right)})"


@dataclass(frozen=True)
class Expression:
    """A parsed expression with its variable dimension."""

    root: Node
    dimension: int
    source: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "_fn", _compile(self.root))

    def __call__(self, x) -> float:
        if isinstance(x, (int, float)):
            x = (float(x),)
        elif hasattr(x, "coords"):
            x = x.coords
        if len(x) != self.dimension:
            raise EvaluationError(f"expected {self.dimension} coordinates, got {len(x)}")
        return self._fn(x)

    def pretty(self) -> str:
        return pretty(self.root)


def parse_expression(text: str, dimension: int | None = None) -> Expression:
    """Parse ``text``; the dimension defaults to the largest variable index used."""
    if dimension is not None and dimension < 1:
        raise ValueError("dimension must be >= 1")
    p = _Parser(text, dimension)
    root = p.parse()
    return Expression(root, dimension if dimension is not None else max(p.max_var, 1), text)
