"""Tiny arithmetic expression language for user-defined maps.

Grammar (EBNF):

    triple  = expr "," expr "," expr ;
    expr    = term { ("+" | "-") term } ;
    term    = factor { ("*" | "/") factor } ;
    factor  = ["+" | "-"] power ;
    power   = atom [ "^" factor ] ;          (right-associative)
    atom    = NUMBER | VARIABLE | FUNC "(" expr ")" | "(" expr ")" ;
    VARIABLE = "x" | "y" | "t" ;
    FUNC     = "sin" | "cos" | "exp" | "log" | "sqrt" | "abs" ;

Expressions compile to vectorized numpy evaluators.  Syntax errors carry
the byte offset of the offending token.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import DslNameError, DslParseError

_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_VARIABLES = ("x", "y", "t")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            off = len(src) - len(stripped)
            raise DslParseError(f"unexpected character {stripped[0]!r}", off)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise DslParseError(f"expected {op!r}, found {val or 'end of input'!r}", off)
        return self.next()

    # -- grammar rules; each returns an AST tuple --------------------------

    def parse_expr(self):
        node = self.parse_term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                node = (val, node, self.parse_term())
            else:
                return node

    def parse_term(self):
        node = self.parse_factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                node = (val, node, self.parse_factor())
            else:
                return node

    def parse_factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.next()
            node = self.parse_factor()
            return node if val == "+" else ("neg", node)
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            return ("^", base, self.parse_factor())
        return base

    def parse_atom(self):
        kind, val, off = self.next()
        if kind == "num":
            return ("num", float(val))
        if kind == "name":
            if val in _VARIABLES:
                return ("var", val)
            if val in _FUNCTIONS:
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return ("call", val, arg)
            raise DslNameError(val, off)
        if kind == "op" and val == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise DslParseError(f"expected a value, found {val or 'end of input'!r}", off)


def parse_expression(src: str):
    """Parse a single expression; the whole input must be consumed."""
    p = _Parser(src)
    node = p.parse_expr()
    kind, val, off = p.peek()
    if kind != "end":
        raise DslParseError(f"unexpected trailing input {val!r}", off)
    return node


def parse_triple(src: str):
    """Parse "fx, fy, ft" into three ASTs."""
    p = _Parser(src)
    first = p.parse_expr()
    p.expect_op(",")
    second = p.parse_expr()
    p.expect_op(",")
    third = p.parse_expr()
    kind, val, off = p.peek()
    if kind != "end":
        raise DslParseError(f"unexpected trailing input {val!r}", off)
    return first, second, third


def evaluate(node, x, y, t):
    op = node[0]
    if op == "num":
        return np.broadcast_to(np.float64(node[1]), np.shape(x)).copy() \
            if np.ndim(x) else node[1]
    if op == "var":
        return {"x": x, "y": y, "t": t}[node[1]]
    if op == "neg":
        return -evaluate(node[1], x, y, t)
    if op == "call":
        return _FUNCTIONS[node[1]](evaluate(node[2], x, y, t))
    a = evaluate(node[1], x, y, t)
    b = evaluate(node[2], x, y, t)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    if op == "^":
        return np.power(a, b)
    raise AssertionError(f"unknown AST node {op!r}")


def compile_expression(src: str):
    """Compile src to a function (x, y, t) -> value, numpy-vectorized."""
    node = parse_expression(src)

    def fn(x, y, t, _node=node):
        return evaluate(_node, x, y, t)

    return fn
