"""Lexer for `.vnns` specification sources.

Tokenizes UTF-8 text into a flat stream; `--` starts a comment running to
end of line. The language is layout-insensitive, so newlines are plain
whitespace and carry no meaning beyond source positions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import Span


class ParseError(Exception):
    """Raised on lexical or syntactic errors, with position and expectation."""

    def __init__(self, message: str, line: int, col: int, expected=()):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(expected)


KEYWORDS = {
    "type", "forall", "exists", "foreach", "let", "in",
    "and", "or", "not",
    "Tensor", "Rat", "Bool", "Nat", "Index", "True", "False",
}

ANNOTATIONS = {
    "network", "dataset", "parameter", "property", "embedding", "unembedding",
}

# Multi-character symbols must precede their prefixes.
_SYMBOLS = [
    "->", "=>", "<=", ">=", "==", "!=",
    "<", ">", "=", ":", "+", "-", "*", "/",
    "(", ")", "[", "]", ",", ".", "!",
]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<decimal>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<nat>\d+)
  | (?P<ident>[A-Za-z][A-Za-z0-9_']*)
  | (?P<at>@[a-z]+)
  | (?P<sym>->|=>|<=|>=|==|!=|[<>=:+\-*/()\[\],.!])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, NAT, DECIMAL, KW, SYM, AT, EOF
    text: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col, self.line, self.col + len(self.text))

    def __str__(self):
        return self.text if self.kind != "EOF" else "<end of input>"


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, bol = 0, 1, 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(
                f"unexpected character {source[pos]!r}", line, pos - bol + 1
            )
        kind = m.lastgroup
        text = m.group()
        col = pos - bol + 1
        if kind == "ws":
            for i, ch in enumerate(text):
                if ch == "\n":
                    line += 1
                    bol = pos + i + 1
        elif kind == "comment":
            pass
        elif kind == "ident":
            tok_kind = "KW" if text in KEYWORDS else "IDENT"
            tokens.append(Token(tok_kind, text, line, col))
        elif kind == "at":
            name = text[1:]
            if name not in ANNOTATIONS:
                raise ParseError(f"unknown annotation {text!r}", line, col)
            tokens.append(Token("AT", name, line, col))
        elif kind == "nat":
            tokens.append(Token("NAT", text, line, col))
        elif kind == "decimal":
            tokens.append(Token("DECIMAL", text, line, col))
        else:
            tokens.append(Token("SYM", text, line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, n - bol + 1))
    return tokens
