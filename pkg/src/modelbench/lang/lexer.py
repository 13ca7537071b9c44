"""Tokenizer for the navigation expression language."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ExprSyntaxError

# multi-char operators first so maximal munch wins
_OPERATORS = (
    "=>", "??", "&&", "||", "==", "!=", "<=", ">=", "<>",
    "+", "-", "*", "/", "<", ">", "?", ":", ".", ",",
    "(", ")", "[", "]", "!", "=", ";",
)

_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", "'": "'", '"': '"', "`": "`", "$": "$"}


@dataclass
class Token:
    kind: str  # NUM STR TEMPLATE IDENT DOLLAR NEWLINE EOF or the operator itself
    value: object
    line: int
    col: int


class Lexer:
    def __init__(self, source: str, line: int = 1, col: int = 1, keep_newlines: bool = False):
        self.source = source
        self.pos = 0
        self.line = line
        self.col = col
        self.keep_newlines = keep_newlines

    def error(self, message):
        raise ExprSyntaxError(message, self.line, self.col)

    def tokens(self) -> list:
        out = []
        while True:
            tok = self._next()
            out.append(tok)
            if tok.kind == "EOF":
                return out

    # -- scanning helpers ---------------------------------------------

    def _peek(self, offset=0):
        i = self.pos + offset
        return self.source[i] if i < len(self.source) else ""

    def _advance(self):
        ch = self.source[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def _next(self) -> Token:
        while self.pos < len(self.source):
            ch = self._peek()
            if ch == "\n" and self.keep_newlines:
                line, col = self.line, self.col
                self._advance()
                return Token("NEWLINE", "\n", line, col)
            if ch in " \t\r\n":
                self._advance()
                continue
            if ch == "/" and self._peek(1) == "/":
                while self.pos < len(self.source) and self._peek() != "\n":
                    self._advance()
                continue
            break
        if self.pos >= len(self.source):
            return Token("EOF", None, self.line, self.col)

        line, col = self.line, self.col
        ch = self._peek()

        if ch.isdigit():
            return self._number(line, col)
        if ch in "'\"":
            return Token("STR", self._string(ch), line, col)
        if ch == "`":
            return Token("TEMPLATE", self._template(), line, col)
        if ch == "$":
            self._advance()
            if not (self._peek().isalpha() or self._peek() == "_"):
                self.error("'$' must be followed by a name")
            return Token("DOLLAR", self._ident(), line, col)
        if ch.isalpha() or ch == "_":
            return Token("IDENT", self._ident(), line, col)
        for op in _OPERATORS:
            if self.source.startswith(op, self.pos):
                for _ in op:
                    self._advance()
                return Token(op, op, line, col)
        self.error(f"unexpected character {ch!r}")

    def _number(self, line, col):
        start = self.pos
        while self._peek().isdigit():
            self._advance()
        is_real = False
        if self._peek() == "." and self._peek(1).isdigit():
            is_real = True
            self._advance()
            while self._peek().isdigit():
                self._advance()
        text = self.source[start:self.pos]
        return Token("NUM", float(text) if is_real else int(text), line, col)

    def _ident(self):
        start = self.pos
        while self._peek().isalnum() or self._peek() == "_":
            self._advance()
        return self.source[start:self.pos]

    def _string(self, quote):
        self._advance()
        out = []
        while True:
            if self.pos >= len(self.source):
                self.error("unterminated string")
            ch = self._advance()
            if ch == quote:
                return "".join(out)
            if ch == "\\":
                esc = self._advance() if self.pos < len(self.source) else ""
                out.append(_ESCAPES.get(esc, esc))
            else:
                out.append(ch)

    def _template(self):
        """Scan a backtick template into ('text', str) / ('expr', tokens) parts."""
        self._advance()
        return self.template_parts(terminator="`")

    def template_parts(self, terminator=None) -> list:
        parts = []
        text = []

        def flush():
            if text:
                parts.append(("text", "".join(text)))
                text.clear()

        while True:
            if self.pos >= len(self.source):
                if terminator is not None:
                    self.error("unterminated template")
                flush()
                return parts
            ch = self._peek()
            if terminator is not None and ch == terminator:
                self._advance()
                flush()
                return parts
            if ch == "\\":
                self._advance()
                esc = self._advance() if self.pos < len(self.source) else ""
                text.append(_ESCAPES.get(esc, esc))
                continue
            if ch == "$" and self._peek(1) == "{":
                self._advance()
                self._advance()
                flush()
                parts.append(("expr", self._splice_tokens()))
                continue
            text.append(self._advance())

    def _splice_tokens(self) -> list:
        """Lex tokens of one ``${...}`` splice up to its matching brace."""
        start = self.pos
        line, col = self.line, self.col
        depth = 1
        while True:
            if self.pos >= len(self.source):
                self.error("unterminated '${' splice")
            ch = self._advance()
            if ch in "'\"":
                # skip over string contents
                while self.pos < len(self.source):
                    c2 = self._advance()
                    if c2 == "\\" and self.pos < len(self.source):
                        self._advance()
                    elif c2 == ch:
                        break
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    break
        inner = self.source[start:self.pos - 1]
        return Lexer(inner, line, col).tokens()


def lex(source: str, keep_newlines: bool = False) -> list:
    return Lexer(source, keep_newlines=keep_newlines).tokens()
