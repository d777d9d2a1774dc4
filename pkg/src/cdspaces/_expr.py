"""Tokenizer and recursive-descent parser for profile expressions.

Grammar::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom (('^' | '**') INTEGER)?
    atom    := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

The tree is built directly as a sympy expression; differentiation is left
to sympy.
"""

import re

import sympy as sp

SMOOTH_FUNCS = {
    "sin": sp.sin,
    "cos": sp.cos,
    "exp": sp.exp,
    "tanh": sp.tanh,
    "sqrt": sp.sqrt,
}
# primitives that would break C^2 regularity of the profile
NON_SMOOTH = {"abs", "max", "min", "sign", "floor", "ceil", "heaviside", "step", "relu"}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^()]))"
)


class ParseError(ValueError):
    """Malformed profile source; ``offset`` is the 0-based character position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    pass


class NonSmoothError(ParseError):
    pass


def tokenize(src):
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            offset = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ParseError(f"unexpected character {src[offset]!r}", offset)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src, names):
        self.tokens = tokenize(src)
        self.i = 0
        self.names = names

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind != "op":
            what = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {what}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = node * rhs if op == "*" else node / rhs
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text in ("-", "+"):
            self.take()
            node = self.unary()
            return -node if text == "-" else node
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text in ("^", "**"):
            self.take()
            kind, text, pos = self.take()
            if kind != "num" or not text.isdigit():
                what = "end of input" if kind == "end" else repr(text)
                raise ParseError(f"exponent must be a nonnegative integer literal, found {what}", pos)
            return base ** int(text)
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return sp.Float(text, 17) if any(c in text for c in ".eE") else sp.Integer(int(text))
        if kind == "name":
            low = text.lower()
            if low in NON_SMOOTH:
                raise NonSmoothError(f"{text!r} is not C^2 and is not allowed in profiles", pos)
            if text in SMOOTH_FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return SMOOTH_FUNCS[text](arg)
            if text in self.names:
                nxt = self.peek()
                if nxt[0] == "op" and nxt[1] == "(":
                    raise ParseError(f"{text!r} is not a function", nxt[2])
                return self.names[text]
            raise UnknownIdentifierError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {what}", pos)


def parse_expression(src, names):
    """Parse ``src`` into a sympy expression; ``names`` maps identifiers to symbols."""
    return _Parser(src, names).parse()
