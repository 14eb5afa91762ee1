"""Parser for the JSON expression dialect used in config files.

Grammar (documented contract; anything else is rejected):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom (('^' | '**') unary)?            # right associative
    atom   := NUMBER | 'x' | 'y' | 'z' | 'pi'
            | ('sin' | 'cos' | 'exp' | 'log') '(' expr ')'
            | '(' expr ')'

Numbers may be integers, decimals or scientific notation.  The parser
produces a sympy expression in the chart coordinates (x, y, z); no other
names, operators or function calls are accepted.
"""

from __future__ import annotations

import re

import sympy as sp

__all__ = ["parse_expression", "ExpressionError", "COORDS"]

COORDS = sp.symbols("x y z", real=True)

_FUNCS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "log": sp.log}
_CONSTS = {"pi": sp.pi, "x": COORDS[0], "y": COORDS[1], "z": COORDS[2]}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)


class ExpressionError(ValueError):
    """Raised when a config expression does not conform to the grammar."""


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionError(f"unexpected character at position {pos}: {text[pos:]!r}")
        pos = m.end()
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name")))
        else:
            tokens.append(("op", m.group("op")))
    if text[pos:].strip():
        raise ExpressionError(f"trailing input: {text[pos:]!r}")
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, text = self.next()
        if kind != "op" or text != op:
            raise ExpressionError(f"expected {op!r}, found {text!r}")

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.next()
            rhs = self.term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.next()
            rhs = self.unary()
            node = node * rhs if op == "*" else node / rhs
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.next()
            return -self.unary()
        if self.peek() == ("op", "+"):
            self.next()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() in (("op", "^"), ("op", "**")):
            self.next()
            expo = self.unary()
            return base**expo
        return base

    def atom(self):
        kind, text = self.next()
        if kind == "num":
            return sp.Integer(int(text)) if re.fullmatch(r"\d+", text) else sp.Float(text)
        if kind == "name":
            if text in _CONSTS:
                return _CONSTS[text]
            if text in _FUNCS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return _FUNCS[text](arg)
            raise ExpressionError(f"unknown name {text!r} (allowed: x, y, z, pi, sin, cos, exp, log)")
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(f"unexpected token {text!r}")


def parse_expression(text: str) -> sp.Expr:
    """Parse a dialect expression into a sympy expression in x, y, z."""
    if not isinstance(text, str):
        raise ExpressionError(f"expression must be a string, got {type(text).__name__}")
    parser = _Parser(_tokenize(text))
    node = parser.expr()
    if parser.peek()[0] != "end":
        raise ExpressionError(f"unconsumed input near {parser.peek()[1]!r}")
    return node
