"""
Lexer for the .abm modelling language
File: abm/lexer.py
"""

import re
from dataclasses import dataclass, field
from typing import List, Tuple

from abm.defects import Defect, compilation_error

KEYWORDS = frozenset({
    # declarations
    "model", "param", "grid", "by", "object", "state", "activity", "init", "count",
    "schedule", "when", "record",
    # schedule primitives
    "do", "random_do", "conditional_do", "random_conditional_do",
    # state types
    "bool", "int", "real", "position",
    # statements
    "todo", "if", "else", "for", "within", "emit",
    # expressions
    "and", "or", "not", "self", "neighbor", "id",
    "bernoulli", "uniform", "randint", "count_neighbors", "count_all", "sum_all",
    "distance", "event_count", "cell", "random_cell", "nearby_cell",
})

BOOL_LITERALS = frozenset({"true", "false"})

# Longest match first: real before int, two-char operators before one-char.
_TOKEN_SPEC = [
    ("newline", r"\n"),
    ("skip", r"[ \t\r]+"),
    ("comment", r"#[^\n]*"),
    ("real", r"\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+"),
    ("int", r"\d+"),
    ("string", r'"[^"\n]*"'),
    ("name", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("assign", r":="),
    ("op", r"<=|>=|==|!=|[-+*/<>=]"),
    ("punct", r"[(){},.:]"),
    ("illegal", r"."),
]
_MASTER = re.compile("|".join(f"(?P<{name}>{pattern})" for name, pattern in _TOKEN_SPEC))


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, bool, int, real, string, assign, op, punct, eof
    text: str
    line: int = field(default=1, compare=False)
    col: int = field(default=1, compare=False)

    def is_(self, kind: str, text: str = None) -> bool:
        return self.kind == kind and (text is None or self.text == text)


def tokenize(source: str) -> Tuple[List[Token], List[Defect]]:
    """Split source into tokens; illegal characters become lexical defects."""
    tokens: List[Token] = []
    defects: List[Defect] = []
    line, line_start = 1, 0
    for match in _MASTER.finditer(source):
        kind = match.lastgroup
        text = match.group()
        col = match.start() - line_start + 1
        if kind == "newline":
            line += 1
            line_start = match.end()
            continue
        if kind in ("skip", "comment"):
            continue
        if kind == "illegal":
            defects.append(compilation_error(line, text, f"illegal character {text!r}"))
            continue
        if kind == "name":
            if text in BOOL_LITERALS:
                kind = "bool"
            elif text in KEYWORDS:
                kind = "keyword"
            else:
                kind = "ident"
        tokens.append(Token(kind, text, line, col))
    return tokens, defects


_IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def is_identifier(text: str) -> bool:
    """A legal, non-reserved .abm name"""
    return bool(_IDENTIFIER.fullmatch(text)) and text not in KEYWORDS and text not in BOOL_LITERALS
