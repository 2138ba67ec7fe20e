"""Pure-Python scanning kernels.

Reference implementation of the routines in ``_kernels_cy.pyx``; the two
modules expose the same functions with the same return values.
"""

COMPARISON = 0
BOOLEAN = 1
MATH = 2
FILTER_PIPE = 3
LOOKUP_CALL = 4
IDENTIFIER = 5
LITERAL = 6
OTHER = 7

_TWO_CHAR = {
    "==": COMPARISON,
    "!=": COMPARISON,
    ">=": COMPARISON,
    "<=": COMPARISON,
    "**": MATH,
    "//": MATH,
}
_ONE_CHAR = {
    ">": COMPARISON,
    "<": COMPARISON,
    "+": MATH,
    "-": MATH,
    "*": MATH,
    "/": MATH,
    "%": MATH,
    "|": FILTER_PIPE,
}
_WORDS = {"is": COMPARISON, "in": COMPARISON, "and": BOOLEAN, "or": BOOLEAN, "not": BOOLEAN}


def _comment_start(line):
    """Offset of a ``#`` that opens a YAML comment on ``line``, else -1."""
    quote = ""
    prev = " "
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        if quote:
            if quote == "'" and ch == "'":
                if i + 1 < n and line[i + 1] == "'":
                    i += 1
                else:
                    quote = ""
            elif quote == '"':
                if ch == "\\":
                    i += 1
                elif ch == '"':
                    quote = ""
        elif ch == "#" and prev in " \t":
            return i
        elif (ch == "'" or ch == '"') and prev in " \t[{,:-":
            quote = ch
        prev = ch
        i += 1
    return -1


def classify_lines(text):
    """Return ``(source, comment, blank, comments)``.

    ``comments`` holds ``(line_number, comment_text)`` for full-line and
    trailing comments; ``comment_text`` starts at the ``#``.
    """
    source = comment = blank = 0
    comments = []
    if not text:
        return 0, 0, 0, comments
    lines = text.split("\n")
    if text.endswith("\n"):
        lines.pop()
    for number, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped:
            blank += 1
        elif stripped[0] == "#":
            comment += 1
            comments.append((number, stripped))
        else:
            source += 1
            pos = _comment_start(line)
            if pos >= 0:
                comments.append((number, line[pos:].rstrip()))
    return source, comment, blank, comments


def find_expressions(text):
    """Locate ``{{ ... }}`` regions.

    Returns ``(spans, unterminated)``: ``spans`` are ``(start, end)`` offsets
    of each interior, ``unterminated`` the offsets of unmatched ``{{``.
    """
    spans = []
    unterminated = []
    i = 0
    while True:
        start = text.find("{{", i)
        if start < 0:
            break
        end = text.find("}}", start + 2)
        if end < 0:
            unterminated.append(start)
            i = start + 2
            continue
        spans.append((start + 2, end))
        i = end + 2
    return spans, unterminated


def lex(expr):
    """Tokenize a template/``when`` expression into ``(kind, start, end)``."""
    tokens = []
    n = len(expr)
    i = 0
    while i < n:
        ch = expr[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "'" or ch == '"':
            j = i + 1
            while j < n:
                c = expr[j]
                if c == "\\":
                    j += 2
                    continue
                if c == ch:
                    j += 1
                    break
                j += 1
            j = min(j, n)
            tokens.append((LITERAL, i, j))
            i = j
            continue
        if ch.isdigit():
            j = i + 1
            while j < n and expr[j].isdigit():
                j += 1
            if j + 1 < n and expr[j] == "." and expr[j + 1].isdigit():
                j += 2
                while j < n and expr[j].isdigit():
                    j += 1
            tokens.append((LITERAL, i, j))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (expr[j].isalnum() or expr[j] == "_"):
                j += 1
            word = expr[i:j]
            kind = _WORDS.get(word, IDENTIFIER)
            if word == "lookup":
                k = j
                while k < n and expr[k].isspace():
                    k += 1
                if k < n and expr[k] == "(":
                    tokens.append((LOOKUP_CALL, i, k + 1))
                    i = k + 1
                    continue
            tokens.append((kind, i, j))
            i = j
            continue
        pair = expr[i : i + 2]
        if pair in _TWO_CHAR:
            tokens.append((_TWO_CHAR[pair], i, i + 2))
            i += 2
            continue
        tokens.append((_ONE_CHAR.get(ch, OTHER), i, i + 1))
        i += 1
    return tokens
