"""Recursive-descent parser.

Precedence, loosest to tightest: lambda, ternary, ``??``, ``||``, ``&&``,
equality, relational, additive, multiplicative, unary, postfix
(member / dynamic member / call / index). Arithmetic is left-associative,
as is the ``??`` chain.
"""

from __future__ import annotations

from functools import lru_cache

from ..errors import ExprSyntaxError
from . import ast
from .lexer import Lexer, lex


class Parser:
    def __init__(self, tokens, source=""):
        self.tokens = [t for t in tokens if t.kind != "NEWLINE"]
        self.source = source
        self.pos = 0

    @property
    def cur(self):
        return self.tokens[self.pos]

    def error(self, message, token=None):
        tok = token or self.cur
        raise ExprSyntaxError(message, tok.line, tok.col)

    def at(self, kind):
        return self.cur.kind == kind

    def eat(self, kind):
        if not self.at(kind):
            self.error(f"expected {kind!r}, found {self.cur.kind!r}")
        tok = self.cur
        self.pos += 1
        return tok

    def parse(self):
        if self.at("EOF"):
            self.error("empty expression")
        node = self.expression()
        if not self.at("EOF"):
            self.error(f"unexpected trailing {self.cur.kind!r}")
        return node

    # -- grammar --------------------------------------------------------

    def expression(self):
        lam = self._try_lambda()
        if lam is not None:
            return lam
        return self.ternary()

    def _try_lambda(self):
        # IDENT => body   |   ( IDENT ) => body
        if self.at("IDENT") and self.tokens[self.pos + 1].kind == "=>":
            tok = self.eat("IDENT")
            self.eat("=>")
            body = self.expression()
            return ast.Lambda(tok.value, body, line=tok.line, col=tok.col)
        if (
            self.at("(")
            and self.tokens[self.pos + 1].kind == "IDENT"
            and self.tokens[self.pos + 2].kind == ")"
            and self.tokens[self.pos + 3].kind == "=>"
        ):
            tok = self.cur
            self.eat("(")
            param = self.eat("IDENT").value
            self.eat(")")
            self.eat("=>")
            body = self.expression()
            return ast.Lambda(param, body, line=tok.line, col=tok.col)
        return None

    def ternary(self):
        cond = self.binary(0)
        if self.at("?"):
            tok = self.eat("?")
            then = self.expression()
            self.eat(":")
            other = self.expression()
            return ast.Ternary(cond, then, other, line=tok.line, col=tok.col)
        return cond

    def binary(self, level):
        if level >= len(ast.BINARY_LEVELS):
            return self.unary()
        ops = ast.BINARY_LEVELS[level]
        node = self.binary(level + 1)
        while self.cur.kind in ops:
            tok = self.eat(self.cur.kind)
            right = self.binary(level + 1)
            node = ast.Binary(tok.kind, node, right, line=tok.line, col=tok.col)
        return node

    def unary(self):
        if self.at("-") or self.at("!"):
            tok = self.eat(self.cur.kind)
            return ast.Unary(tok.kind, self.unary(), line=tok.line, col=tok.col)
        return self.postfix()

    def postfix(self):
        node = self.primary()
        while True:
            if self.at("."):
                self.eat(".")
                if self.at("DOLLAR"):
                    tok = self.eat("DOLLAR")
                    node = ast.DynamicName(node, tok.value, line=tok.line, col=tok.col)
                else:
                    tok = self.eat("IDENT")
                    node = ast.Member(node, tok.value, line=tok.line, col=tok.col)
            elif self.at("("):
                tok = self.eat("(")
                args = []
                if not self.at(")"):
                    args.append(self.expression())
                    while self.at(","):
                        self.eat(",")
                        args.append(self.expression())
                self.eat(")")
                node = ast.Call(node, args, line=tok.line, col=tok.col)
            elif self.at("["):
                tok = self.eat("[")
                index = self.expression()
                self.eat("]")
                node = ast.Index(node, index, line=tok.line, col=tok.col)
            else:
                return node

    def primary(self):
        tok = self.cur
        if self.at("NUM"):
            self.eat("NUM")
            return ast.Literal(tok.value, line=tok.line, col=tok.col)
        if self.at("STR"):
            self.eat("STR")
            return ast.Literal(tok.value, line=tok.line, col=tok.col)
        if self.at("TEMPLATE"):
            self.eat("TEMPLATE")
            return self._template(tok)
        if self.at("DOLLAR"):
            self.eat("DOLLAR")
            return ast.DynamicName(None, tok.value, line=tok.line, col=tok.col)
        if self.at("IDENT"):
            self.eat("IDENT")
            if tok.value == "true":
                return ast.Literal(True, line=tok.line, col=tok.col)
            if tok.value == "false":
                return ast.Literal(False, line=tok.line, col=tok.col)
            if tok.value == "null":
                return ast.Literal(None, line=tok.line, col=tok.col)
            return ast.Name(tok.value, line=tok.line, col=tok.col)
        if self.at("("):
            self.eat("(")
            node = self.expression()
            self.eat(")")
            return node
        self.error(f"unexpected {tok.kind!r}")

    def _template(self, tok):
        parts = []
        for kind, payload in tok.value:
            if kind == "text":
                parts.append(payload)
            else:
                parts.append(Parser(payload).parse())
        return ast.Template(parts, line=tok.line, col=tok.col)


@lru_cache(maxsize=1024)
def parse(source: str):
    """Parse one expression. The returned AST is shared and must not be mutated."""
    return Parser(lex(source), source).parse()


def parse_tokens(tokens, source=""):
    return Parser(tokens, source).parse()


@lru_cache(maxsize=1024)
def parse_template(source: str):
    """Parse bare template text (``...${expr}...`` without backticks)."""
    parts = Lexer(source).template_parts(terminator=None)
    node_parts = []
    for kind, payload in parts:
        if kind == "text":
            node_parts.append(payload)
        else:
            node_parts.append(Parser(payload).parse())
    return ast.Template(node_parts, line=1, col=1)
