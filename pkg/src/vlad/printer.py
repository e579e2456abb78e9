"""Printing values and core expressions back to source text."""

import math

from .syntax import Anf, App, Global, Lam, Lit, Var, as_boolean, as_pair
from .values import EMPTY, Closure, Custom, Primitive, Tagged


def format_real(x):
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    r = repr(x)
    if r.endswith(".0"):
        r = r[:-2]
    return r


def print_value(v):
    if type(v) is float:
        return format_real(v)
    if v is EMPTY:
        return "()"
    if isinstance(v, Tagged):
        return f"(reverse {print_value(v.inner)})"
    if isinstance(v, Primitive):
        return f"#<primitive {v.tag.name}>"
    if isinstance(v, Custom):
        return f"#<custom {print_value(v.primal)}>"
    if isinstance(v, Closure):
        pair = as_pair(v)
        if pair is not None:
            return _print_list(pair)
        b = as_boolean(v)
        if b is not None:
            return "#t" if b else "#f"
        return f"#<closure:λ{v.lam.param}>"
    return repr(v)


def _print_list(pair):
    items = []
    while pair is not None:
        head, tail = pair
        items.append(print_value(head))
        pair = as_pair(tail)
    if tail is EMPTY:
        return "(" + " ".join(items) + ")"
    return "(" + " ".join(items) + " . " + print_value(tail) + ")"


def _wrap(text, depth):
    for _ in range(depth):
        text = f"(rad {text})"
    return text


def print_expr(e):
    """Render a core expression as source that re-parses (with reserved names
    allowed) to an equivalent expression."""
    if isinstance(e, Var):
        return str(e.var)
    if isinstance(e, Lit):
        return _wrap("()" if e.value is EMPTY else format_real(e.value), e.depth)
    if isinstance(e, Global):
        return _wrap(e.name, e.depth)
    if isinstance(e, App):
        return f"({print_expr(e.fn)} {print_expr(e.arg)})"
    if isinstance(e, Lam):
        return f"(lambda ({e.param}) {print_expr(e.body)})"
    if isinstance(e, Anf):
        if not e.bindings:
            return str(e.result)
        steps = " ".join(f"({b.target} {print_expr(b.rhs)})" for b in e.bindings)
        return f"(let* ({steps}) {e.result})"
    raise TypeError(f"not an expression: {e!r}")
