"""Line scanning, whitespace tokens, entropy and template-expression lexing.

The character-level loops live in a compiled kernel (``_kernels_cy``) when it
has been built; otherwise the pure-Python twin ``_kernels_py`` is used. Set
``IACMETRICS_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import enum
import math
import os
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

from . import _kernels_py

if os.environ.get("IACMETRICS_PURE_PYTHON"):
    _kernels = _kernels_py
else:
    try:
        from . import _kernels_cy as _kernels
    except ImportError:
        _kernels = _kernels_py

BACKEND = "cython" if _kernels is not _kernels_py else "python"


class TokenKind(enum.IntEnum):
    COMPARISON_OP = _kernels_py.COMPARISON
    BOOLEAN_OP = _kernels_py.BOOLEAN
    MATH_OP = _kernels_py.MATH
    FILTER_PIPE = _kernels_py.FILTER_PIPE
    LOOKUP_CALL = _kernels_py.LOOKUP_CALL
    IDENTIFIER = _kernels_py.IDENTIFIER
    LITERAL = _kernels_py.LITERAL
    OTHER = _kernels_py.OTHER


@dataclass(frozen=True)
class LineStats:
    source_lines: int
    comment_lines: int
    blank_lines: int
    comments: tuple[tuple[int, str], ...]

    @property
    def total_lines(self) -> int:
        return self.source_lines + self.comment_lines + self.blank_lines


@dataclass(frozen=True)
class ExpressionToken:
    kind: TokenKind
    text: str
    position: tuple[int, int]


@dataclass(frozen=True)
class TemplateExpression:
    text: str
    position: tuple[int, int]  # line/column of the opening braces, 1-based
    start: int  # offset of the interior in the scanned text
    end: int


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    line: Optional[int]
    message: str


def scan_lines(raw_text: str) -> LineStats:
    """Classify every physical line as source, comment or blank."""
    source, comment, blank, comments = _kernels.classify_lines(raw_text)
    return LineStats(source, comment, blank, tuple(comments))


def source_line_flags(raw_text: str) -> list[bool]:
    """``flags[i]`` is true when physical line ``i + 1`` is a source line."""
    if not raw_text:
        return []
    lines = raw_text.split("\n")
    if raw_text.endswith("\n"):
        lines.pop()
    flags = []
    for line in lines:
        stripped = line.strip()
        flags.append(bool(stripped) and stripped[0] != "#")
    return flags


def tokenize_text(raw_text: str) -> list[str]:
    return raw_text.split()


def text_entropy(tokens: Iterable[str]) -> float:
    """Shannon entropy (bits) of the token frequency distribution."""
    counts = Counter(tokens)
    total = sum(counts.values())
    if total == 0:
        return 0.0
    entropy = 0.0
    # Sorted so the float sum does not depend on token order.
    for count in sorted(counts.values()):
        p = count / total
        entropy -= p * math.log2(p)
    # -0.0 and tiny negative rounding for single-symbol input
    return max(entropy, 0.0)


class _LineIndex:
    def __init__(self, text: str):
        self._starts = [0]
        pos = text.find("\n")
        while pos >= 0:
            self._starts.append(pos + 1)
            pos = text.find("\n", pos + 1)

    def position(self, offset: int) -> tuple[int, int]:
        line = bisect_right(self._starts, offset)
        return line, offset - self._starts[line - 1] + 1


def extract_template_expressions(
    raw_text: str, diagnostics: Optional[list[Diagnostic]] = None
) -> list[TemplateExpression]:
    """Interior text of every ``{{ ... }}`` in ``raw_text`` (whitespace-trimmed).

    Comments and quoted strings are scanned too. An unmatched ``{{`` adds a
    warning to ``diagnostics`` and scanning resumes after it.
    """
    spans, unterminated = _kernels.find_expressions(raw_text)
    if not spans and not unterminated:
        return []
    index = _LineIndex(raw_text)
    result = []
    for start, end in spans:
        line, col = index.position(start - 2)
        result.append(TemplateExpression(raw_text[start:end].strip(), (line, col), start, end))
    if diagnostics is not None:
        for offset in unterminated:
            line, _ = index.position(offset)
            diagnostics.append(Diagnostic("warning", line, "unterminated template expression"))
    return result


def lex_expression(expr_text: str, line: int = 1, column: int = 1) -> list[ExpressionToken]:
    """Lex ``expr_text``; positions are offset from ``(line, column)``."""
    raw = _kernels.lex(expr_text)
    if not raw:
        return []
    if "\n" not in expr_text:
        return [
            ExpressionToken(TokenKind(kind), expr_text[start:end], (line, column + start))
            for kind, start, end in raw
        ]
    index = _LineIndex(expr_text)
    tokens = []
    for kind, start, end in raw:
        rel_line, rel_col = index.position(start)
        pos = (line, column + rel_col - 1) if rel_line == 1 else (line + rel_line - 1, rel_col)
        tokens.append(ExpressionToken(TokenKind(kind), expr_text[start:end], pos))
    return tokens


def count_kinds(tokens: Iterable[ExpressionToken]) -> Counter:
    return Counter(token.kind for token in tokens)


def strip_template_regions(text: str) -> str:
    """``text`` with every complete ``{{ ... }}`` region blanked out."""
    spans, _ = _kernels.find_expressions(text)
    if not spans:
        return text
    pieces = []
    prev = 0
    for start, end in spans:
        pieces.append(text[prev : start - 2])
        pieces.append(" ")
        prev = end + 2
    pieces.append(text[prev:])
    return "".join(pieces)
