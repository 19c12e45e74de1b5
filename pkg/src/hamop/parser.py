"""Recursive-descent parser for the expression grammar.

::

    expr   := term { ("+"|"-") term }
    term   := factor { ("*"|"/") factor }
    factor := atom [ "^" integer ] | "-" factor
    atom   := number | "x" | "u" [ "_" digits ] | ident "(" expr ")" | ident | "(" expr ")"

``I`` is the imaginary unit; identifiers other than the kernels
``sin cos exp ln sqrt`` are parameters and must be declared.  Integers
parse as exact rationals, decimals as floating scalars.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import expr as E
from .expr import Expr

__all__ = ["ParseError", "parse", "resolve_name", "Token", "tokenize"]


class ParseError(ValueError):
    def __init__(self, message: str, column: int = 0, line: int | None = None):
        self.message = message
        self.column = column
        self.line = line
        where = f"line {line}, column {column}" if line is not None else f"column {column}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Token:
    kind: str  # NUM, ID, OP, END
    text: str
    col: int


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<NUM>\d+\.\d*(?:[eE][-+]?\d+)?|\d*\.\d+(?:[eE][-+]?\d+)?|\d+)"
    r"|(?P<ID>[A-Za-z_][A-Za-z0-9_]*)|(?P<OP>\*\*|[-+*/^(),]))"
)

_U_RE = re.compile(r"^u(?:_?(\d+))?$")
_W_RE = re.compile(r"^w(\d+)_(\d+)$")


def tokenize(text: str) -> list:
    pos = 0
    out = []
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ParseError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        tok = m.group(kind)
        col = m.start(kind) + 1
        if tok == "**":
            tok = "^"
        out.append(Token(kind, tok, col))
        pos = m.end()
    out.append(Token("END", "", n + 1))
    return out


def resolve_name(name: str) -> int:
    """Atom id for a variable name (x, u, u_k, I, wS_K, or a parameter)."""
    if name == "x":
        return E.X_ID
    if name == "I":
        return E.I_ID
    m = _U_RE.match(name)
    if m:
        k = int(m.group(1) or 0)
        return E._resolve_var(E.U(k))
    m = _W_RE.match(name)
    if m:
        return E._resolve_var(E.W(int(m.group(1)), int(m.group(2))))
    return E._resolve_var(E.param(name))


class _Parser:
    def __init__(self, text, params, aliases, namespace, functions):
        self.tokens = tokenize(text)
        self.i = 0
        self.params = params
        self.aliases = aliases or {}
        self.namespace = namespace
        self.functions = functions or {}

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def eat(self, text=None, kind=None) -> Token:
        t = self.tok
        if text is not None and t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.col)
        if kind is not None and t.kind != kind:
            raise ParseError(f"expected {kind}, found {t.text or 'end of input'!r}", t.col)
        self.i += 1
        return t

    def parse(self) -> Expr:
        if self.tok.kind == "END":
            raise ParseError("empty expression", self.tok.col)
        e = self.expr()
        if self.tok.kind != "END":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.col)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.text in ("+", "-"):
            op = self.eat().text
            t = self.term()
            e = e + t if op == "+" else e - t
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.tok.text in ("*", "/"):
            op = self.eat()
            f = self.factor()
            if op.text == "*":
                e = e * f
            else:
                if f.is_zero():
                    raise ParseError("division by zero", op.col)
                e = e / f
        return e

    def factor(self) -> Expr:
        if self.tok.text == "-":
            self.eat()
            return -self.factor()
        if self.tok.text == "+":
            self.eat()
            return self.factor()
        base = self.atom()
        if self.tok.text == "^":
            self.eat()
            sign = 1
            if self.tok.text in ("-", "+"):
                sign = -1 if self.eat().text == "-" else 1
            t = self.tok
            if t.kind != "NUM" or not t.text.isdigit():
                raise ParseError("exponent must be an integer", t.col)
            self.eat()
            k = sign * int(t.text)
            if k < 0 and base.is_zero():
                raise ParseError("division by zero", t.col)
            base = base ** k
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "NUM":
            self.eat()
            if t.text.isdigit():
                return E.const(int(t.text))
            return E.const(float(t.text))
        if t.text == "(":
            self.eat()
            e = self.expr()
            self.eat(")")
            return e
        if t.kind == "ID":
            self.eat()
            name = t.text
            if self.tok.text == "(":
                return self.call(name, t)
            return self.name(name, t)
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.col)

    def call(self, name, t) -> Expr:
        if name in self.functions:
            self.eat("(")
            args = [self.expr()]
            while self.tok.text == ",":
                self.eat()
                args.append(self.expr())
            self.eat(")")
            return self.functions[name](*args)
        if name not in E.KERNELS:
            raise ParseError(f"unknown function {name!r}", t.col)
        self.eat("(")
        arg = self.expr()
        self.eat(")")
        try:
            return E.kernel(name, arg)
        except (ArithmeticError, ValueError) as exc:
            raise ParseError(str(exc), t.col) from exc

    def name(self, name, t) -> Expr:
        if name in self.aliases:
            name = self.aliases[name]
            if isinstance(name, Expr):
                return name
        if self.namespace is not None:
            v = self.namespace(name)
            if v is not None:
                return v
        if name == "x":
            return E.X
        if name == "I":
            return E.I
        m = _U_RE.match(name)
        if m:
            try:
                return E.U(int(m.group(1) or 0))
            except E.JetOrderError as exc:
                raise ParseError(str(exc), t.col) from exc
        if name in E.KERNELS:
            raise ParseError(f"kernel {name!r} needs an argument", t.col)
        if self.params is None:
            return E.param(name)
        if name not in self.params:
            raise ParseError(f"undeclared identifier {name!r}", t.col)
        value = self.params[name] if isinstance(self.params, dict) else None
        if value is None:
            return E.param(name)
        return value if isinstance(value, Expr) else E.const(value)


def parse(text: str, params=None, aliases=None, namespace=None, functions=None) -> Expr:
    """Parse an expression.

    ``params`` is the set of declared parameter names (or a dict mapping
    names to values or ``None``); when omitted every unknown identifier is
    accepted as a parameter.  ``aliases`` renames identifiers before lookup
    (used for the ``y, v, v_k`` coordinates of substitution files).
    ``namespace`` and ``functions`` let callers inject extra symbols and
    callables.
    """
    return _Parser(text, params, aliases, namespace, functions).parse()
