# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled scanning kernels; mirrors ``_kernels_py`` exactly."""

cdef enum:
    COMPARISON = 0
    BOOLEAN = 1
    MATH = 2
    FILTER_PIPE = 3
    LOOKUP_CALL = 4
    IDENTIFIER = 5
    LITERAL = 6
    OTHER = 7


cdef inline bint _is_ident(Py_UCS4 c):
    return c == u'_' or c.isalnum()


cdef Py_ssize_t _comment_start(str line):
    cdef Py_ssize_t i = 0, n = len(line)
    cdef Py_UCS4 ch, quote = 0, prev = u' '
    while i < n:
        ch = line[i]
        if quote:
            if quote == u"'" and ch == u"'":
                if i + 1 < n and line[i + 1] == u"'":
                    i += 1
                else:
                    quote = 0
            elif quote == u'"':
                if ch == u'\\':
                    i += 1
                elif ch == u'"':
                    quote = 0
        elif ch == u'#' and (prev == u' ' or prev == u'\t'):
            return i
        elif (ch == u"'" or ch == u'"') and (
            prev == u' ' or prev == u'\t' or prev == u'[' or prev == u'{'
            or prev == u',' or prev == u':' or prev == u'-'
        ):
            quote = ch
        prev = ch
        i += 1
    return -1


def classify_lines(str text):
    cdef Py_ssize_t source = 0, comment = 0, blank = 0
    cdef Py_ssize_t n = len(text), start = 0, end, a, b, number = 0, pos
    comments = []
    if n == 0:
        return 0, 0, 0, comments
    while start < n:
        end = text.find(u"\n", start)
        if end < 0:
            end = n
        number += 1
        a = start
        b = end
        while a < b and text[a].isspace():
            a += 1
        while b > a and text[b - 1].isspace():
            b -= 1
        if a == b:
            blank += 1
        elif text[a] == u'#':
            comment += 1
            comments.append((number, text[a:b]))
        else:
            source += 1
            line = text[start:end]
            pos = _comment_start(line)
            if pos >= 0:
                comments.append((number, line[pos:].rstrip()))
        start = end + 1
    return source, comment, blank, comments


def find_expressions(str text):
    cdef Py_ssize_t i = 0, start, end
    spans = []
    unterminated = []
    while True:
        start = text.find(u"{{", i)
        if start < 0:
            break
        end = text.find(u"}}", start + 2)
        if end < 0:
            unterminated.append(start)
            i = start + 2
            continue
        spans.append((start + 2, end))
        i = end + 2
    return spans, unterminated


def lex(str expr):
    cdef Py_ssize_t n = len(expr), i = 0, j, k
    cdef Py_UCS4 ch, c, nxt
    cdef int kind
    tokens = []
    while i < n:
        ch = expr[i]
        if ch.isspace():
            i += 1
            continue
        if ch == u"'" or ch == u'"':
            j = i + 1
            while j < n:
                c = expr[j]
                if c == u'\\':
                    j += 2
                    continue
                if c == ch:
                    j += 1
                    break
                j += 1
            if j > n:
                j = n
            tokens.append((LITERAL, i, j))
            i = j
            continue
        if ch.isdigit():
            j = i + 1
            while j < n and expr[j].isdigit():
                j += 1
            if j + 1 < n and expr[j] == u'.' and expr[j + 1].isdigit():
                j += 2
                while j < n and expr[j].isdigit():
                    j += 1
            tokens.append((LITERAL, i, j))
            i = j
            continue
        if ch.isalpha() or ch == u'_':
            j = i + 1
            while j < n and _is_ident(expr[j]):
                j += 1
            kind = IDENTIFIER
            if j - i == 2:
                if expr[i] == u'i' and (expr[i + 1] == u's' or expr[i + 1] == u'n'):
                    kind = COMPARISON
                elif expr[i] == u'o' and expr[i + 1] == u'r':
                    kind = BOOLEAN
            elif j - i == 3:
                if expr[i:j] == u"and" or expr[i:j] == u"not":
                    kind = BOOLEAN
            elif j - i == 6 and expr[i:j] == u"lookup":
                k = j
                while k < n and expr[k].isspace():
                    k += 1
                if k < n and expr[k] == u'(':
                    tokens.append((LOOKUP_CALL, i, k + 1))
                    i = k + 1
                    continue
            tokens.append((kind, i, j))
            i = j
            continue
        if i + 1 < n:
            nxt = expr[i + 1]
            if nxt == u'=' and (ch == u'=' or ch == u'!' or ch == u'>' or ch == u'<'):
                tokens.append((COMPARISON, i, i + 2))
                i += 2
                continue
            if (ch == u'*' or ch == u'/') and nxt == ch:
                tokens.append((MATH, i, i + 2))
                i += 2
                continue
        if ch == u'>' or ch == u'<':
            kind = COMPARISON
        elif ch == u'+' or ch == u'-' or ch == u'*' or ch == u'/' or ch == u'%':
            kind = MATH
        elif ch == u'|':
            kind = FILTER_PIPE
        else:
            kind = OTHER
        tokens.append((kind, i, i + 1))
        i += 1
    return tokens
