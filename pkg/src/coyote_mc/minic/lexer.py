"""Hand-rolled lexer for MiniC."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..diagnostics import Diagnostic, SourceLoc

KEYWORDS = {
    "int",
    "bool",
    "void",
    "record",
    "external",
    "if",
    "else",
    "while",
    "return",
    "assert",
    "null",
    "true",
    "false",
}

# Longest match first.
PUNCT = [
    "&&", "||", "==", "!=", "<=", ">=",
    "{", "}", "(", ")", "[", "]", ";", ",", ".",
    "=", "<", ">", "+", "-", "*", "/", "%", "!", "&",
]

_DOMAIN_RE = re.compile(r"@domain\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)")


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "int" | "punct" | "kw" | "eof"
    text: str
    loc: SourceLoc


@dataclass(frozen=True)
class Annotation:
    """A @domain(lo,hi) marker found in a comment; attaches to the next function."""

    line: int
    lo: int
    hi: int


class LexError(Exception):
    def __init__(self, diagnostic: Diagnostic):
        self.diagnostic = diagnostic
        super().__init__(diagnostic.render())


def tokenize(path: str, text: str) -> tuple[list[Token], list[Annotation]]:
    """Produce the token stream and any annotation comments for one unit."""
    tokens: list[Token] = []
    annotations: list[Annotation] = []
    i = 0
    line = 1
    col = 1
    n = len(text)

    def loc() -> SourceLoc:
        return SourceLoc(path, line, col)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = text[i]
        if c in " \t\r\n":
            advance(1)
            continue
        if text.startswith("//", i):
            end = text.find("\n", i)
            if end == -1:
                end = n
            comment = text[i:end]
            m = _DOMAIN_RE.search(comment)
            if m:
                annotations.append(Annotation(line, int(m.group(1)), int(m.group(2))))
            advance(end - i)
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end == -1:
                raise LexError(Diagnostic(loc(), "error", "unterminated block comment"))
            advance(end + 2 - i)
            continue
        if c.isdigit():
            start = i
            start_loc = loc()
            while i < n and text[i].isdigit():
                advance(1)
            lit = text[start:i]
            if int(lit) > 2**31 - 1:
                raise LexError(
                    Diagnostic(start_loc, "error", f"integer literal {lit} out of range")
                )
            tokens.append(Token("int", lit, start_loc))
            continue
        if c.isalpha() or c == "_":
            start = i
            start_loc = loc()
            while i < n and (text[i].isalnum() or text[i] == "_"):
                advance(1)
            word = text[start:i]
            kind = "kw" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, start_loc))
            continue
        for p in PUNCT:
            if text.startswith(p, i):
                tokens.append(Token("punct", p, loc()))
                advance(len(p))
                break
        else:
            raise LexError(Diagnostic(loc(), "error", f"unexpected character {c!r}"))

    tokens.append(Token("eof", "", loc()))
    return tokens, annotations
