"""S-expression reader for ``.vl`` source text."""

import re
from dataclasses import dataclass, field

from .errors import ParseError

__all__ = ["Symbol", "RealLiteral", "EmptyList", "ListForm", "parse", "parse_one"]


@dataclass(frozen=True)
class Symbol:
    name: str
    location: tuple = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class RealLiteral:
    value: float
    location: tuple = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class EmptyList:
    location: tuple = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ListForm:
    children: tuple
    location: tuple = field(default=None, compare=False, repr=False)


_NUMBER = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?\Z")
_SPECIAL_REALS = {
    "NaN": float("nan"),
    "+NaN": float("nan"),
    "-NaN": float("nan"),
    "Infinity": float("inf"),
    "+Infinity": float("inf"),
    "-Infinity": float("-inf"),
}
_ALIASES = {"λ": "lambda"}
_DELIMS = set("();")


def _looks_numeric(tok):
    body = tok[1:] if tok[:1] in "+-" else tok
    if body.startswith("."):
        body = body[1:]
    return body[:1].isdigit()


def _tokens(text):
    """Yield ``(kind, token, (line, col))`` triples; kind is '(' ')' or 'atom'."""
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i, line, col = i + 1, line + 1, 1
        elif c.isspace():
            i, col = i + 1, col + 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            yield c, c, (line, col)
            i, col = i + 1, col + 1
        else:
            start, start_col = i, col
            while i < n and not text[i].isspace() and text[i] not in _DELIMS:
                i += 1
            col += i - start
            yield "atom", text[start:i], (line, start_col)
    yield "eof", "", (line, col)


def _atom(tok, loc, allow_reserved):
    if tok in _SPECIAL_REALS:
        return RealLiteral(_SPECIAL_REALS[tok], loc)
    if _looks_numeric(tok):
        if not _NUMBER.match(tok):
            raise ParseError(f"invalid number {tok!r}", loc)
        return RealLiteral(float(tok), loc)
    if "%" in tok and not allow_reserved:
        raise ParseError(f"'%' is reserved and cannot appear in {tok!r}", loc)
    return Symbol(_ALIASES.get(tok, tok), loc)


def parse(text, allow_reserved=False):
    """Parse ``text`` into a list of top-level surface forms.

    With ``allow_reserved`` the reader also accepts the ``%`` names used for
    generated temporaries and tagged variables (as printed by
    :func:`vlad.printer.print_expr`).
    """
    stack = [[]]
    opened = []
    for kind, tok, loc in _tokens(text):
        if kind == "(":
            stack.append([])
            opened.append(loc)
        elif kind == ")":
            if not opened:
                raise ParseError("unexpected ')'", loc)
            children = stack.pop()
            start = opened.pop()
            form = ListForm(tuple(children), start) if children else EmptyList(start)
            stack[-1].append(form)
        elif kind == "atom":
            stack[-1].append(_atom(tok, loc, allow_reserved))
        else:
            if opened:
                line, col = opened[-1]
                raise ParseError(
                    f"unexpected end of input: '(' opened at {line}:{col} is never closed",
                    loc,
                )
    return stack[0]


def parse_one(text, allow_reserved=False):
    forms = parse(text, allow_reserved)
    if len(forms) != 1:
        raise ParseError(f"expected exactly one form, found {len(forms)}", (1, 1))
    return forms[0]
