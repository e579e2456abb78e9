"""Evaluator and the value-level AD operations.

One :class:`Interpreter` owns the global environment, the memo caches for
``rad``/``rad-inverse``/``zero`` and the transform cache. Closure
application runs on an explicit stack, so deep (tail-)recursion in the
language does not consume Python stack.
"""

import logging
import math

from .errors import (
    ArityError,
    ConformanceError,
    EvalError,
    NotAFunction,
    NotReverseTagged,
    ResourceError,
    SyntaxFormError,
    UnboundVariable,
)
from .reader import ListForm, Symbol, parse
from .syntax import (
    Anf,
    App,
    Desugarer,
    Global,
    Lam,
    Lit,
    Var,
    Variable,
    as_pair,
    to_anf,
)
from .transform import TransformCache, inverse_env, transform_env, transform_lambda, transform_primitive
from .values import EMPTY, Closure, Custom, Kind, Primitive, PrimitiveTag, Tagged, describe

log = logging.getLogger(__name__)

DEFAULT_STEPS = 1_000_000


def _ieee(fn):
    def op(x):
        try:
            return fn(x)
        except OverflowError:
            return math.inf
        except ValueError:
            return math.nan

    return op


def _log(x):
    if x == 0.0:
        return -math.inf
    if x < 0.0 or math.isnan(x):
        return math.nan
    return math.log(x)


def _div(a, b):
    try:
        return a / b
    except ZeroDivisionError:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def _mul(a, b):
    return a * b


UNARY = {
    "sqrt": _ieee(lambda x: math.sqrt(x) if x == x else x),
    "exp": _ieee(math.exp),
    "log": _log,
    "sin": _ieee(math.sin),
    "cos": _ieee(math.cos),
    "neg": lambda x: -x,
    "abs": abs,
}

BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": _mul,
    "/": _div,
    "atan2": math.atan2,
}

BINARY_BOOL = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    "=": lambda a, b: a == b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}

UNARY_BOOL = {
    "zero?": lambda v, it: type(v) is float and v == 0.0,
    "positive?": lambda v, it: type(v) is float and v > 0.0,
    "negative?": lambda v, it: type(v) is float and v < 0.0,
    "null?": lambda v, it: v is EMPTY,
    "real?": lambda v, it: type(v) is float,
    "pair?": lambda v, it: as_pair(v) is not None,
}

AD_PRIMITIVES = {
    "zero": Kind.ZERO,
    "plus": Kind.PLUS,
    "rad": Kind.J,
    "rad-inverse": Kind.JINV,
    "attach-derivative": Kind.ATTACH,
    # used only by the transformed rad and rad-inverse
    "%unrad-sensitivity": Kind.SENS_JINV,
    "%rad-sensitivity": Kind.SENS_J,
}


def primitive_table():
    """Name -> Primitive for every primitive bound in σ0."""
    table = {}
    for names, kind in (
        (UNARY, Kind.UNARY),
        (BINARY, Kind.BINARY),
        (UNARY_BOOL, Kind.UNARY_BOOL),
        (BINARY_BOOL, Kind.BINARY_BOOL),
    ):
        for name in names:
            table[name] = Primitive(PrimitiveTag(kind, name))
    for name, kind in AD_PRIMITIVES.items():
        table[name] = Primitive(PrimitiveTag(kind, name))
    return table


PRELUDE = """
(define cons (lambda (x1 x2) (lambda (x3) (x3 x1 x2))))
(define car (lambda (x) (x (lambda (x1 x2) x1))))
(define cdr (lambda (x) (x (lambda (x1 x2) x2))))
(define true car)
(define false cdr)
"""


class Interpreter:
    """An evaluation context: globals, memo caches and a step budget.

    Not thread-safe; use one instance per thread.
    """

    def __init__(self, steps=DEFAULT_STEPS, trace=False):
        if steps <= 0:
            raise ValueError("step budget must be positive")
        self.budget = steps
        self.trace = trace
        self.steps = 0
        self._limit = None
        self.globals = {}
        self.primitives = primitive_table()
        self._by_tag = {p.tag: p for p in self.primitives.values()}
        self.globals.update(self.primitives)
        self.transforms = TransformCache()
        self._j = {}
        self._jinv = {}
        self._zero = {}
        self.load(PRELUDE)
        self.true = self.globals["true"]
        self.false = self.globals["false"]

    # -- program loading ------------------------------------------------------

    def desugarer(self):
        return Desugarer(self.globals)

    def load(self, text, allow_reserved=False):
        """Evaluate every top-level form of ``text``; return the last value."""
        return self.run_forms(parse(text, allow_reserved))

    def run_forms(self, forms):
        defines = []
        for f in forms:
            if (isinstance(f, ListForm) and isinstance(f.children[0], Symbol)
                    and f.children[0].name == "define"):
                defines.append(f)
        for f in defines:
            name = f.children[1] if len(f.children) == 3 else None
            if not isinstance(name, Symbol):
                raise SyntaxFormError("define: expected (define name expr)", f.location)
            self.globals.setdefault(name.name, _Undefined(name.name))
        value = EMPTY
        for f in forms:
            value = self.run_form(f)
        return value

    def run_form(self, form):
        try:
            if (isinstance(form, ListForm) and isinstance(form.children[0], Symbol)
                    and form.children[0].name == "define"):
                if len(form.children) != 3 or not isinstance(form.children[1], Symbol):
                        raise SyntaxFormError("define: expected (define name expr)", form.location)
                name = form.children[1].name
                self.globals.setdefault(name, _Undefined(name))
                self.globals[name] = self.evaluate({}, self.desugarer()(form.children[2]))
                return EMPTY
            return self.evaluate({}, self.desugarer()(form))
        except (EvalError, ResourceError) as err:
            if err.location is None:
                err.location = getattr(form, "location", None)
            raise

    # -- globals and constants --------------------------------------------------

    def lookup_global(self, name):
        try:
            v = self.globals[name]
        except KeyError:
            raise UnboundVariable(f"unbound variable {name}") from None
        if isinstance(v, _Undefined):
            raise UnboundVariable(f"{name} is used before its definition finished")
        return v

    def constant(self, c):
        v = c.value if isinstance(c, Lit) else self.lookup_global(c.name)
        for _ in range(c.depth):
            v = self.j(v)
        return v

    # -- evaluation ---------------------------------------------------------------

    def _enter(self):
        outer = self._limit is None
        if outer:
            self._limit = self.steps + self.budget
        return outer

    def _tick(self):
        self.steps += 1
        if self.steps > self._limit:
            raise ResourceError(f"step budget of {self.budget} applications exhausted")

    def evaluate(self, env, e):
        """Evaluate a core expression in ``env`` (a dict of Variable -> value)."""
        outer = self._enter()
        try:
            return self._eval(env, e)
        finally:
            if outer:
                self._limit = None

    def _eval(self, env, e):
        if isinstance(e, Var):
            try:
                return env[e.var]
            except KeyError:
                raise UnboundVariable(f"unbound variable {e.var}") from None
        if isinstance(e, (Lit, Global)):
            return self.constant(e)
        if isinstance(e, Lam):
            return self.close(env, to_anf(e))
        if isinstance(e, App):
            f = self._eval(env, e.fn)
            return self._run(f, self._eval(env, e.arg))
        if isinstance(e, Anf):
            return self._run(Closure(dict(env), Lam(Variable("%top"), e)), EMPTY)
        raise TypeError(f"not an expression: {e!r}")

    def close(self, env, lam):
        try:
            return Closure({x: env[x] for x in lam.free}, lam)
        except KeyError as err:
            raise UnboundVariable(f"unbound variable {err.args[0]}") from None

    def apply(self, f, v):
        outer = self._enter()
        try:
            return self._run(f, v)
        finally:
            if outer:
                self._limit = None

    def _run(self, f, v):
        """Apply ``f`` to ``v`` with an explicit continuation stack."""
        stack = []
        while True:
            # reduce f v to a value, or to a closure body to run
            while isinstance(f, Custom):
                f = f.primal
            self._tick()
            if self.trace:
                log.debug("%sapply %s to %s", "  " * len(stack), describe(f), describe(v))
            if isinstance(f, Closure):
                env = dict(f.env)
                env[f.lam.param] = v
                body = f.lam.body
                i = 0
            elif isinstance(f, Primitive):
                value = self.apply_primitive(f, v)
                body = None
            else:
                raise NotAFunction(f"cannot apply {describe(f)} (to {describe(v)})")

            while True:
                if body is not None:
                    bindings = body.bindings
                    n = len(bindings)
                    call = None
                    while i < n:
                        b = bindings[i]
                        rhs = b.rhs
                        if isinstance(rhs, App):
                            try:
                                fn, arg = env[rhs.fn.var], env[rhs.arg.var]
                            except KeyError as err:
                                raise UnboundVariable(f"unbound variable {err.args[0]}") from None
                            if i == n - 1 and b.target == body.result:
                                call = (fn, arg)  # tail call: no frame
                            else:
                                stack.append((env, body, i))
                                call = (fn, arg)
                            break
                        if isinstance(rhs, Var):
                            try:
                                env[b.target] = env[rhs.var]
                            except KeyError:
                                raise UnboundVariable(f"unbound variable {rhs.var}") from None
                        elif isinstance(rhs, Lam):
                            env[b.target] = self.close(env, rhs)
                        else:
                            env[b.target] = self.constant(rhs)
                        i += 1
                    if call is not None:
                        f, v = call
                        break
                    value = env[body.result]
                if not stack:
                    return value
                env, body, i = stack.pop()
                env[body.bindings[i].target] = value
                i += 1

    # -- primitives ---------------------------------------------------------------

    def _pair(self, prim, v):
        pair = as_pair(v)
        if pair is None:
            raise ArityError(f"{prim.tag.name} expects a pair of arguments, got {describe(v)}")
        return pair

    def _real(self, prim, v):
        if type(v) is not float:
            raise EvalError(f"{prim.tag.name} expects a real, got {describe(v)}")
        return v

    def boolean(self, b):
        return self.true if b else self.false

    def apply_primitive(self, prim, v):
        tag = prim.tag
        kind = tag.kind
        if kind is Kind.UNARY:
            return UNARY[tag.name](self._real(prim, v))
        if kind is Kind.BINARY:
            a, b = self._pair(prim, v)
            return BINARY[tag.name](self._real(prim, a), self._real(prim, b))
        if kind is Kind.BINARY_BOOL:
            a, b = self._pair(prim, v)
            return self.boolean(BINARY_BOOL[tag.name](self._real(prim, a), self._real(prim, b)))
        if kind is Kind.UNARY_BOOL:
            return self.boolean(UNARY_BOOL[tag.name](v, self))
        if kind is Kind.ZERO:
            return self.zero(v)
        if kind is Kind.PLUS:
            return self.plus(*self._pair(prim, v))
        if kind is Kind.J:
            return self.j(v)
        if kind is Kind.JINV:
            return self.j_inverse(v)
        if kind is Kind.ATTACH:
            return Custom(*self._pair(prim, v))
        if kind is Kind.SENS_JINV:
            x, dy = self._pair(prim, v)
            return dy if isinstance(x, Custom) else self.j_inverse(dy)
        if kind is Kind.SENS_J:
            x, dy = self._pair(prim, v)
            return dy if self.attached_image(x) else self.j(dy)
        raise AssertionError(tag)

    # -- AD value operations --------------------------------------------------------

    def zero(self, v):
        if type(v) is float:
            return 0.0
        if v is EMPTY:
            return EMPTY
        if isinstance(v, Tagged):
            return Tagged(self.zero(v.inner))
        if isinstance(v, Primitive):
            return EMPTY
        if isinstance(v, Custom):
            return self.zero(v.primal)
        if isinstance(v, Closure):
            hit = self._zero.get(id(v))
            if hit is not None:
                return hit[1]
            out = self.tagged_list([self.zero(v.env[x]) for x in v.lam.bree], v.lam.param)
            self._zero[id(v)] = (v, out)
            return out
        raise EvalError(f"zero: unexpected value {describe(v)}")

    def plus(self, a, b, path=()):
        if isinstance(a, Custom):
            return self.plus(a.primal, b, path)
        if isinstance(b, Custom):
            return self.plus(a, b.primal, path)
        if type(a) is float and type(b) is float:
            return a + b
        if a is EMPTY and b is EMPTY:
            return EMPTY
        if isinstance(a, Tagged) and isinstance(b, Tagged):
            return Tagged(self.plus(a.inner, b.inner, path + ("reverse",)))
        if isinstance(a, Primitive) and isinstance(b, Primitive) and a.tag == b.tag:
            return a
        if isinstance(a, Closure) and isinstance(b, Closure) and (a.lam is b.lam or a.lam == b.lam):
            names = _pair_names(a)
            env = {x: self.plus(a.env[x], b.env[x], path + (names.get(x, str(x)),)) for x in a.env}
            return Closure(env, a.lam)
        raise ConformanceError(describe(a), describe(b), path)

    def j(self, v):
        if type(v) is float or v is EMPTY or isinstance(v, Tagged):
            return Tagged(v)
        hit = self._j.get(id(v))
        if hit is not None:
            return hit[1]
        if isinstance(v, Custom):
            out = v.derivative
        elif isinstance(v, Primitive):
            out = Closure({}, transform_primitive(v.tag, self.globals))
        elif isinstance(v, Closure):
            lam = transform_lambda(v.lam, self.transforms)
            out = Closure(transform_env(v.env, v.lam, self.j), lam)
        else:
            raise EvalError(f"rad: unexpected value {describe(v)}")
        self._j[id(v)] = (v, out)
        self._jinv.setdefault(id(out), (out, v))
        return out

    def j_inverse(self, v):
        if isinstance(v, Tagged):
            return v.inner
        hit = self._jinv.get(id(v))
        if hit is not None:
            return hit[1]
        if isinstance(v, Custom):
            out = Custom(self.j_inverse(v.primal), v)
        elif isinstance(v, Closure) and v.lam.primitive is not None:
            out = self._by_tag[v.lam.primitive]
        elif isinstance(v, Closure) and v.lam.source is not None:
            out = Closure(inverse_env(v.env, v.lam.source, self.j_inverse), v.lam.source)
        else:
            raise NotReverseTagged(f"rad-inverse: {describe(v)} is not a reverse value")
        self._jinv[id(v)] = (v, out)
        return out

    def attached_image(self, v):
        """True if ``v`` is the attached derivative standing for rad of a custom value."""
        inv = self._jinv.get(id(v))
        return inv is not None and isinstance(inv[1], Custom)

    def tagged_pair(self, a, d, x):
        """``(a ,x d)``: a pair tagged like the variable ``x``."""
        if x.reverse_depth == 0:
            return self.cons(a, d)
        return self.j(self.tagged_pair(self.j_inverse(a), self.j_inverse(d), x.unreverse()))

    def tagged_empty(self, x):
        v = EMPTY
        for _ in range(x.reverse_depth):
            v = Tagged(v)
        return v

    def tagged_list(self, items, x):
        if x.reverse_depth == 0:
            return self.make_list(items)
        return self.j(self.tagged_list([self.j_inverse(i) for i in items], x.unreverse()))

    # -- Church-encoded data --------------------------------------------------------

    def cons(self, a, d):
        inner = self.apply(self.globals["cons"], a)
        return self.apply(inner, d)

    def make_list(self, items):
        out = EMPTY
        for item in reversed(items):
            out = self.cons(item, out)
        return out

    def list_items(self, v):
        items = []
        while v is not EMPTY:
            pair = as_pair(v)
            if pair is None:
                raise EvalError(f"improper list ending in {describe(v)}")
            items.append(pair[0])
            v = pair[1]
        return items

    # -- conveniences ---------------------------------------------------------------

    def gradient(self, f, x):
        """∇ f x: the sensitivity of the argument at output sensitivity 1."""
        out = as_pair(self.apply(self.j(f), self.j(x)))
        if out is None:
            raise EvalError("reverse transform did not return a (value, backpropagator) pair")
        sens = as_pair(self.apply(out[1], 1.0))
        if sens is None:
            raise EvalError("backpropagator did not return a pair")
        return sens[1]


def _pair_names(closure):
    pair = as_pair(closure)
    if pair is None:
        return {}
    b1, b2 = closure.lam.body.bindings
    return {b1.rhs.arg.var: "car", b2.rhs.arg.var: "cdr"}


class _Undefined:
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name


def sigma0(interp=None):
    """The top-level environment: primitives plus the Church-encoding helpers."""
    interp = interp or Interpreter()
    return dict(interp.globals)
