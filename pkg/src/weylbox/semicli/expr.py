"""A tiny expression language for fields over x1, x2, x3.

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?            right associative, binds tighter than unary minus
    atom   := number | name | func "(" expr ")" | "(" expr ")"
    vector := "(" expr "," expr "," expr ")"

Functions: sin cos exp abs sqrt.  Constants: pi.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from ..errors import ParseError

FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs, "sqrt": np.sqrt}
CONSTS = {"pi": np.pi}
VARS = ("x1", "x2", "x3")

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


@dataclass(frozen=True)
class Vec:
    items: tuple


def tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[col]!r}", column=col + 1)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, column=tok[2] + 1)

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] == "end":
            self.fail(f"expected {value!r}" + (" before end of input" if tok[0] == "end" else f", found {tok[1]!r}"))
        return self.take()

    def top(self):
        tok = self.peek()
        if tok[1] == "(":
            save = self.i
            self.take()
            first = self.expr()
            if self.peek()[1] == ",":
                items = [first]
                while self.peek()[1] == ",":
                    self.take()
                    items.append(self.expr())
                self.expect(")")
                if len(items) != 3:
                    self.fail(f"a vector needs 3 components, found {len(items)}", tok)
                node = Vec(tuple(items))
                if self.peek()[0] != "end":
                    self.fail(f"unexpected {self.peek()[1]!r}")
                return node
            self.i = save
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            tok = self.take()
            rhs = self.unary()
            if tok[1] == "/" and _is_constant(rhs) and np.all(evaluate(rhs, 0.0, 0.0, 0.0) == 0):
                self.fail("division by a constant zero", tok)
            node = Bin(tok[1], node, rhs)
        return node

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        kind, val, _ = tok
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in VARS:
                return Var(val)
            if val in CONSTS:
                return Var(val)
            self.fail(f"unknown name {val!r}", tok)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.fail("unexpected end of input", tok)
        self.fail(f"unexpected {val!r}", tok)


def parse(text: str):
    """Parse a scalar expression or a 3-vector ``(e1, e2, e3)``."""
    if not isinstance(text, str):
        raise ParseError("expression must be a string")
    return _Parser(text).top()


def _is_constant(node) -> bool:
    if isinstance(node, Num):
        return True
    if isinstance(node, Var):
        return node.name in CONSTS
    if isinstance(node, Neg):
        return _is_constant(node.arg)
    if isinstance(node, Call):
        return _is_constant(node.arg)
    if isinstance(node, Bin):
        return _is_constant(node.left) and _is_constant(node.right)
    return False


def evaluate(node, x1, x2, x3):
    """Evaluate on numpy arrays (broadcasting); a Vec returns a tuple of three arrays."""
    if isinstance(node, Vec):
        return tuple(evaluate(n, x1, x2, x3) for n in node.items)
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name in CONSTS:
            return CONSTS[node.name]
        return {"x1": x1, "x2": x2, "x3": x3}[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.arg, x1, x2, x3)
    if isinstance(node, Call):
        return FUNCS[node.func](evaluate(node.arg, x1, x2, x3))
    a = evaluate(node.left, x1, x2, x3)
    b = evaluate(node.right, x1, x2, x3)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        if np.any(np.asarray(b) == 0):
            raise ZeroDivisionError("division by zero while evaluating expression")
        return a / b
    with np.errstate(invalid="ignore"):
        return np.power(a, b)


def to_text(node) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    if isinstance(node, Vec):
        return "(" + ", ".join(to_text(n) for n in node.items) + ")"
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    return f"({to_text(node.left)} {node.op} {to_text(node.right)})"


@dataclass(frozen=True)
class FieldExpression:
    text: str
    tree: object

    @classmethod
    def parse(cls, text: str) -> "FieldExpression":
        return cls(text, parse(text))

    @property
    def is_vector(self) -> bool:
        return isinstance(self.tree, Vec)

    @property
    def is_constant(self) -> bool:
        items = self.tree.items if self.is_vector else (self.tree,)
        return all(_is_constant(n) for n in items)

    def __call__(self, x1, x2, x3):
        out = evaluate(self.tree, x1, x2, x3)
        shape = np.broadcast(np.asarray(x1), np.asarray(x2), np.asarray(x3)).shape
        if self.is_vector:
            return tuple(np.broadcast_to(np.asarray(o, dtype=float), shape) for o in out)
        return np.broadcast_to(np.asarray(out, dtype=float), shape)

    def component(self, d: int) -> "FieldExpression":
        if not self.is_vector:
            raise ValueError("not a vector expression")
        node = self.tree.items[d]
        return FieldExpression(to_text(node), node)

    def __str__(self) -> str:
        return to_text(self.tree)
