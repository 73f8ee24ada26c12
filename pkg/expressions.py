"""
Arithmetic expression grammar parsed into sympy trees
"""
import re

import sympy as sp

from errors import ArityError, ExpressionSyntaxError, UnknownIdentifierError

_NUMBER_REGEXP = re.compile(r"(\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")  #: numeric literal
_NAME_REGEXP = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")  #: variable, parameter or function name
_OPERATORS = '+-*/^(),'

FUNCTIONS = {
    'sin': sp.sin,
    'cos': sp.cos,
    'tan': sp.tan,
    'exp': sp.exp,
    'sqrt': sp.sqrt,
    'log': sp.log,
}
CONSTANTS = {'pi': sp.pi}


def tokenize(text):
    """Split text into (kind, value, position) tokens"""
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        m = _NUMBER_REGEXP.match(text, i)
        if m:
            tokens.append(('num', m.group(0), i))
            i = m.end()
            continue
        m = _NAME_REGEXP.match(text, i)
        if m:
            tokens.append(('name', m.group(0), i))
            i = m.end()
            continue
        if ch in _OPERATORS:
            tokens.append(('op', ch, i))
            i += 1
            continue
        raise ExpressionSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(('end', '', len(text)))
    return tokens


class Parser:
    """Recursive descent parser; '^' is right associative and binds tighter than unary minus"""

    def __init__(self, text, symbols):
        self.text = text
        self.symbols = symbols
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, tok, where = self.advance()
        if tok != value:
            found = tok or 'end of input'
            raise ExpressionSyntaxError(f"expected {value!r}, found {found!r}", where)

    def parse(self):
        if self.peek()[0] == 'end':
            raise ExpressionSyntaxError("empty expression", 0)
        node = self.expression()
        kind, tok, where = self.peek()
        if kind != 'end':
            raise ExpressionSyntaxError(f"unexpected {tok!r}", where)
        return node

    def expression(self):
        node = self.term()
        while self.peek()[1] in ('+', '-') and self.peek()[0] == 'op':
            op = self.advance()[1]
            rhs = self.term()
            node = node + rhs if op == '+' else node - rhs
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ('*', '/') and self.peek()[0] == 'op':
            op = self.advance()[1]
            rhs = self.unary()
            node = node * rhs if op == '*' else node / rhs
        return node

    def unary(self):
        if self.peek()[0] == 'op' and self.peek()[1] == '-':
            self.advance()
            return -self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == 'op' and self.peek()[1] == '^':
            self.advance()
            return base ** self.unary()
        return base

    def atom(self):
        kind, tok, where = self.advance()
        if kind == 'num':
            return sp.Rational(tok)
        if kind == 'op' and tok == '(':
            node = self.expression()
            self.expect(')')
            return node
        if kind == 'name':
            if tok in FUNCTIONS:
                return self.call(tok, where)
            if tok in self.symbols:
                return self.symbols[tok]
            if tok in CONSTANTS:
                return CONSTANTS[tok]
            raise UnknownIdentifierError(tok, where)
        raise ExpressionSyntaxError(f"unexpected {tok or 'end of input'!r}", where)

    def call(self, name, where):
        kind, tok, at = self.peek()
        if tok != '(':
            raise ExpressionSyntaxError(f"function '{name}' must be called", at)
        self.advance()
        args = []
        if self.peek()[1] != ')':
            args.append(self.expression())
            while self.peek()[1] == ',':
                self.advance()
                args.append(self.expression())
        self.expect(')')
        if len(args) != 1:
            raise ArityError(name, 1, len(args))
        return FUNCTIONS[name](args[0])


def parse_expression(text, variables, parameters=None):
    """Parse text over the given variable names; parameters are substituted by value"""
    symbols = {name: sp.Symbol(name, real=True) for name in variables}
    for name, value in (parameters or {}).items():
        if name in symbols:
            raise ExpressionSyntaxError(f"parameter '{name}' shadows a variable", 0)
        symbols[name] = sp.Integer(int(value)) if float(value).is_integer() else sp.Float(value)
    return Parser(str(text), symbols).parse()
