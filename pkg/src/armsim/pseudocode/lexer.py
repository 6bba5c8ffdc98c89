from __future__ import annotations

import re
from dataclasses import dataclass


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0, expected=()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        where = f"{line}:{col}: " if line else ""
        extra = f" (expected {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{where}{message}{extra}")


KEYWORDS = {
    "if", "then", "else", "end", "and", "or", "AND", "OR", "EOR", "NOT",
    "Flag", "UNPREDICTABLE", "for", "to", "do", "case", "of", "otherwise",
    "endcase", "param", "CPSR", "Reg", "Memory", "old",
}


@dataclass(frozen=True)
class Token:
    kind: str    # INT, IDENT, KW, OP, NL, EOF
    text: str
    line: int
    col: int

    @property
    def value(self) -> int:
        return int(self.text, 0)

    def is_(self, kind: str, text: str | None = None) -> bool:
        return self.kind == kind and (text is None or self.text == text)


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>//[^\n]*)
  | (?P<nl>\n|;)
  | (?P<int>0[xX][0-9a-fA-F]+|0[bB][01]+|[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<op>==|!=|<<|>>|[=+\-&|^~()\[\],:])
""", re.VERBOSE)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            tokens.append(Token("NL", s, line, col))
            if s == "\n":
                line += 1
                line_start = m.end()
        elif kind == "int":
            tokens.append(Token("INT", s, line, col))
        elif kind == "ident":
            tokens.append(Token("KW" if s in KEYWORDS else "IDENT", s, line, col))
        elif kind == "op":
            tokens.append(Token("OP", s, line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens
