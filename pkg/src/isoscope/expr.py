"""Infix arithmetic expressions for vector-field right-hand sides.

Grammar (whitespace insignificant)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'

State variables are ``x1 .. xn``; any other identifier must be a declared
parameter. Supported calls are ``pow(a, b)``, ``exp(a)`` and ``log(a)``.
Because unary minus sits above ``power``, ``-x1^2`` is ``-(x1^2)``.

Evaluation works on Python floats and on numpy arrays alike, so the same
expression can drive a single ODE step or a whole grid of Jacobian probes.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "ExpressionError",
    "ParseError",
    "DomainError",
    "Const",
    "Var",
    "Param",
    "Neg",
    "BinOp",
    "Call",
    "Expression",
    "parse_expression",
    "eval_expression",
    "compile_expression",
    "to_source",
    "ipow",
    "power",
    "safe_div",
]


class ExpressionError(ValueError):
    """Base class for expression failures."""


class ParseError(ExpressionError):
    """Syntax error, unknown identifier or arity mismatch.

    ``position`` is the 0-based offset into the source where parsing failed.
    """

    def __init__(self, message: str, position: int, source: str = ""):
        self.position = position
        self.source = source
        super().__init__(f"{message} at position {position}")


class DomainError(ExpressionError, ArithmeticError):
    """Division by zero, log of a non-positive value, or 0 to a negative power."""


# -- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based; x1 -> 0


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Const, Var, Param, Neg, BinOp, Call]

_ARITY = {"pow": 2, "exp": 1, "log": 1}


@dataclass(frozen=True)
class Expression:
    """A parsed expression bound to a state dimension and parameter list."""

    root: Node
    n: int
    params: tuple
    source: str = ""

    def __call__(self, x, p):
        return eval_expression(self, x, p)

    def __str__(self) -> str:
        return to_source(self.root)


# -- tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)
_STATE_RE = re.compile(r"x([1-9][0-9]*)$")


def _tokenize(source: str):
    pos = 0
    tokens = []
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            # skip leading whitespace to report the offending character
            bad = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ParseError(f"unexpected character {source[bad]!r}", bad, source)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, n: int, params: Sequence[str]):
        self.source = source
        self.n = n
        self.params = set(params)
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, expected: str):
        kind, text, pos = self.peek()
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"expected {expected}, found {found}", pos, self.source)

    def expect(self, text: str):
        kind, tok, _ = self.peek()
        if kind != "op" or tok != text:
            self.error(repr(text))
        self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            self.error("operator or end of input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, tok, _ = self.peek()
        if kind == "op" and tok == "-":
            self.advance()
            return Neg(self.unary())
        if kind == "op" and tok == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, tok, pos = self.peek()
        if kind == "num":
            self.advance()
            return Const(float(tok))
        if kind == "ident":
            self.advance()
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                return self.call(tok, pos)
            m = _STATE_RE.match(tok)
            if m:
                index = int(m.group(1))
                if index > self.n:
                    raise ParseError(
                        f"state variable {tok} out of range for dimension {self.n}",
                        pos,
                        self.source,
                    )
                return Var(index - 1)
            if tok in self.params:
                return Param(tok)
            raise ParseError(f"unknown identifier {tok!r}", pos, self.source)
        if kind == "op" and tok == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.error("number, identifier or '('")

    def call(self, name: str, pos: int) -> Node:
        if name not in _ARITY:
            raise ParseError(f"unknown function {name!r}", pos, self.source)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        if len(args) != _ARITY[name]:
            raise ParseError(
                f"{name} takes {_ARITY[name]} argument(s), got {len(args)}",
                pos,
                self.source,
            )
        return Call(name, tuple(args))


def parse_expression(source: str, n: int, params: Sequence[str] = ()) -> Expression:
    """Parse ``source`` into an :class:`Expression` over ``x1..xn`` and ``params``.

    Raises
    ------
    ParseError
        On malformed input, unknown identifiers or wrong call arity.
    """
    if not source or not source.strip():
        raise ParseError("empty expression", 0, source or "")
    root = _Parser(source, n, params).parse()
    return Expression(root=root, n=n, params=tuple(params), source=source)


# -- arithmetic with domain checks ------------------------------------------


def _is_array(v) -> bool:
    return isinstance(v, np.ndarray)


def _any(cond) -> bool:
    return bool(np.any(cond)) if _is_array(cond) else bool(cond)


def ipow(x, k: int):
    """``x**k`` for integer ``k`` by repeated multiplication.

    Legal at ``x == 0`` for ``k >= 0``. Builtin models use this helper too so
    that they agree bit-for-bit with their expression-text equivalents.
    """
    if k == 0:
        return np.ones_like(x) if _is_array(x) else 1.0
    m = -k if k < 0 else k
    r = x
    for _ in range(m - 1):
        r = r * x
    if k < 0:
        if _any(r == 0):
            raise DomainError("0 raised to a negative power")
        r = 1.0 / r
    return r


def _integer_exponent(e):
    if _is_array(e):
        if e.size and np.all(e == e.flat[0]):
            e = float(e.flat[0])
        else:
            return None
    e = float(e)
    if math.isfinite(e) and e.is_integer() and abs(e) <= 1024:
        return int(e)
    return None


def power(x, e):
    """``x^e``: repeated multiplication for integer ``e``, else ``exp(e*log(x))`` with ``x > 0``."""
    k = _integer_exponent(e)
    if k is not None:
        return ipow(x, k)
    if _any(np.asarray(x) <= 0):
        raise DomainError("non-integer power of a non-positive base")
    if _is_array(x) or _is_array(e):
        return np.exp(e * np.log(x))
    return math.exp(e * math.log(x))


def safe_div(a, b):
    if _any(b == 0):
        raise DomainError("division by zero")
    return a / b


def _log(a):
    if _any(np.asarray(a) <= 0):
        raise DomainError("log of a non-positive value")
    return np.log(a) if _is_array(a) else math.log(a)


def _exp(a):
    if _is_array(a):
        return np.exp(a)
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


_BIN = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": safe_div,
    "^": power,
}
_CALL = {"pow": power, "exp": _exp, "log": _log}


def _compile(node: Node, pindex: dict) -> Callable:
    if isinstance(node, Const):
        v = node.value
        return lambda x, p: v
    if isinstance(node, Var):
        i = node.index
        return lambda x, p: x[i]
    if isinstance(node, Param):
        j = pindex[node.name]
        return lambda x, p: p[j]
    if isinstance(node, Neg):
        f = _compile(node.operand, pindex)
        return lambda x, p: -f(x, p)
    if isinstance(node, BinOp):
        fl = _compile(node.left, pindex)
        fr = _compile(node.right, pindex)
        op = _BIN[node.op]
        return lambda x, p: op(fl(x, p), fr(x, p))
    if isinstance(node, Call):
        fn = _CALL[node.name]
        fargs = [_compile(a, pindex) for a in node.args]
        if len(fargs) == 1:
            (fa,) = fargs
            return lambda x, p: fn(fa(x, p))
        fa, fb = fargs
        return lambda x, p: fn(fa(x, p), fb(x, p))
    raise TypeError(f"not an expression node: {node!r}")


def compile_expression(e: Expression) -> Callable:
    """Return ``f(x, p)`` evaluating ``e``; ``p`` is indexed in ``e.params`` order."""
    pindex = {name: k for k, name in enumerate(e.params)}
    return _compile(e.root, pindex)


def eval_expression(e: Expression, x, p) -> float:
    """Evaluate ``e`` at state ``x`` with parameters ``p``.

    ``p`` may be a mapping from name to value or a sequence ordered like
    ``e.params``. ``x`` must have length ``e.n``.
    """
    if len(x) != e.n:
        raise ValueError(f"state has length {len(x)}, expected {e.n}")
    if isinstance(p, dict):
        missing = [name for name in e.params if name not in p]
        if missing:
            raise ValueError(f"unbound parameters: {missing}")
        p = [p[name] for name in e.params]
    elif len(p) != len(e.params):
        raise ValueError(f"got {len(p)} parameter values, expected {len(e.params)}")
    return compile_expression(e)(x, p)


# -- printing ----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_UNARY_PREC = 3


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _UNARY_PREC
    return 5


def to_source(node: Node) -> str:
    """Print ``node`` back to text that reparses to the same tree."""
    if isinstance(node, Expression):
        node = node.root
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        # operand of unary minus is parsed at unary level: wrap +,-,*,/
        if _prec(node.operand) < _UNARY_PREC:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, BinOp):
        prec = _PREC[node.op]
        left = to_source(node.left)
        right = to_source(node.right)
        if node.op == "^":
            # base is an atom; exponent is parsed at unary level
            if _prec(node.left) < 5:
                left = f"({left})"
            if _prec(node.right) < _UNARY_PREC:
                right = f"({right})"
            return f"{left}^{right}"
        if _prec(node.left) < prec:
            left = f"({left})"
        # left-associative: equal precedence on the right needs parentheses
        if _prec(node.right) <= prec:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")
