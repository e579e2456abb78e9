"""Core syntax: tagged variables, the lambda-calculus AST, desugaring of the
surface language, A-normal-form conversion and free-variable analyses."""

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property

from .errors import SyntaxFormError
from .reader import EmptyList, ListForm, RealLiteral, Symbol
from .values import EMPTY


class Tag(IntEnum):
    # Values fix the order used by compare_vars.
    REVERSE = 0
    SENSITIVITY = 1
    BACKPROPAGATOR = 2


_TAG_SUFFIX = {Tag.REVERSE: "r", Tag.SENSITIVITY: "s", Tag.BACKPROPAGATOR: "b"}
_SUFFIX_TAG = {v: k for k, v in _TAG_SUFFIX.items()}


class Variable:
    """A base name plus a stack of tags, innermost first."""

    __slots__ = ("base", "tags", "_key", "_hash")

    def __init__(self, base, tags=()):
        self.base = base
        self.tags = tuple(Tag(t) for t in tags)
        self._key = (base, tuple(int(t) for t in self.tags))
        self._hash = hash(self._key)

    @classmethod
    def parse(cls, name):
        """Inverse of ``str``: ``x%r%s`` is x, reverse-tagged, then sensitivity-tagged."""
        if "%" not in name[1:]:
            return cls(name)
        head, _, rest = name[1:].partition("%")
        parts = rest.split("%") if rest else []
        base = name[0] + head
        if not all(p in _SUFFIX_TAG for p in parts):
            return cls(name)
        return cls(base, [_SUFFIX_TAG[p] for p in parts])

    def _with(self, tag):
        return Variable(self.base, self.tags + (tag,))

    def reverse(self):
        return self._with(Tag.REVERSE)

    def sensitivity(self):
        return self._with(Tag.SENSITIVITY)

    def backpropagator(self):
        return self._with(Tag.BACKPROPAGATOR)

    def unreverse(self):
        """Drop the outermost reverse tag."""
        for i in range(len(self.tags) - 1, -1, -1):
            if self.tags[i] is Tag.REVERSE:
                return Variable(self.base, self.tags[:i] + self.tags[i + 1 :])
        raise ValueError(f"{self} carries no reverse tag")

    @property
    def reverse_depth(self):
        return sum(1 for t in self.tags if t is Tag.REVERSE)

    @property
    def untagged(self):
        return not self.tags

    def __eq__(self, other):
        return isinstance(other, Variable) and self._key == other._key

    def __lt__(self, other):
        return self._key < other._key

    def __hash__(self):
        return self._hash

    def __str__(self):
        return self.base + "".join("%" + _TAG_SUFFIX[t] for t in self.tags)

    def __repr__(self):
        return f"Variable({str(self)!r})"


def compare_vars(a, b):
    """Three-way comparison under the total order on variables."""
    if a._key == b._key:
        return 0
    return -1 if a._key < b._key else 1


# -- expressions ------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    var: Variable


@dataclass(frozen=True)
class App:
    fn: object
    arg: object


@dataclass(frozen=True)
class Lit:
    """A literal real or ``()``, with ``depth`` reverse transforms applied."""

    value: object
    depth: int = 0


@dataclass(frozen=True)
class Global:
    """Reference to a top-level binding, with ``depth`` reverse transforms applied."""

    name: str
    depth: int = 0


@dataclass(frozen=True)
class Binding:
    target: Variable
    rhs: object  # Var (alias) | App of two Vars | Lam | Lit | Global


@dataclass(frozen=True)
class Anf:
    bindings: tuple
    result: Variable


@dataclass(frozen=True)
class Lam:
    param: Variable
    body: object  # Anf once converted, any Expr before
    # the lambda this one was reverse-transformed from
    source: object = field(default=None, compare=False, repr=False)
    # set on the lambdas that implement transformed primitives
    primitive: object = field(default=None, compare=False, repr=False)

    @cached_property
    def free(self):
        return frozenset(_fv(self))

    @cached_property
    def bree(self):
        if self.primitive is not None:
            return ()
        if self.param.tags and self.param.tags[-1] is Tag.REVERSE and self.source is not None:
            return tuple(v.reverse() for v in self.source.bree)
        return tuple(sorted(self.free))


CONSTANTS = (Lit, Global)


def _fv(e):
    if isinstance(e, Var):
        return {e.var}
    if isinstance(e, App):
        return _fv(e.fn) | _fv(e.arg)
    if isinstance(e, Lam):
        return _fv(e.body) - {e.param}
    if isinstance(e, Anf):
        out, bound = set(), set()
        for b in e.bindings:
            out |= _fv(b.rhs) - bound
            bound.add(b.target)
        if e.result not in bound:
            out.add(e.result)
        return out
    return set()


def free_vars(e):
    """Free variables of ``e`` in variable order."""
    if isinstance(e, Lam):
        return sorted(e.free)
    return sorted(_fv(e))


def bree(lam):
    """Untransformed free variables of a lambda, in variable order.

    For a reverse-transformed lambda these are the reverse-tagged free
    variables of its source; lambdas implementing transformed primitives
    have none.
    """
    return list(lam.bree)


# -- A-normal form ----------------------------------------------------------


def to_anf(e):
    """Convert every lambda body in ``e`` to A-normal form."""
    if isinstance(e, Lam):
        if isinstance(e.body, Anf):
            return e
        return Lam(e.param, anf_body(e.body), e.source, e.primitive)
    if isinstance(e, App):
        return App(to_anf(e.fn), to_anf(e.arg))
    return e


def anf_body(e):
    """Linearize ``e`` into an :class:`Anf` body with fresh ``%t`` targets."""
    bindings = []
    counter = [0]

    def fresh():
        counter[0] += 1
        return Variable(f"%t{counter[0]}")

    def name(x):
        if isinstance(x, Var):
            return x.var
        r = rhs(x)
        t = fresh()
        bindings.append(Binding(t, r))
        return t

    def rhs(x):
        if isinstance(x, App):
            f = name(x.fn)
            a = name(x.arg)
            return App(Var(f), Var(a))
        if isinstance(x, Lam):
            return to_anf(x)
        return x

    r = rhs(e)
    t = fresh()
    bindings.append(Binding(t, r))
    return Anf(tuple(bindings), t)


# -- desugaring ---------------------------------------------------------------

# σ0 names whose primitives take an encoded pair; (f a b) becomes (f (cons a b)).
PAIR_PRIMITIVES = frozenset(
    ["+", "-", "*", "/", "atan2", "<", "<=", "=", ">", ">=", "plus", "attach-derivative",
     "%rad-sensitivity", "%unrad-sensitivity"]
)

SPECIAL_FORMS = frozenset(["lambda", "let", "let*", "letrec", "if", "list", "define"])

_DUMMY = Variable("%_")


def _lam(params, body):
    for p in reversed(params):
        body = Lam(p, body)
    return body


def _apply(f, args):
    for a in args:
        f = App(f, a)
    return f


def _z_combinator():
    f, x, v = Variable("%zf"), Variable("%zx"), Variable("%zv")
    half = Lam(x, App(Var(f), Lam(v, App(App(Var(x), Var(x)), Var(v)))))
    return Lam(f, App(half, half))


def _selector(i, n):
    ys = [Variable(f"%y{k}") for k in range(n)]
    return _lam(ys, Var(ys[i]))


class Desugarer:
    """Turns surface forms into core expressions.

    Symbols that are not lexically bound but name a top-level binding become
    :class:`Global` references; all other symbols become variables.
    """

    def __init__(self, globals_=()):
        self.globals = set(globals_)

    def __call__(self, form, scope=frozenset()):
        return self.expr(form, scope)

    def expr(self, form, scope):
        if isinstance(form, RealLiteral):
            return Lit(form.value)
        if isinstance(form, EmptyList):
            return Lit(EMPTY)
        if isinstance(form, Symbol):
            if form.name in SPECIAL_FORMS:
                raise SyntaxFormError(f"'{form.name}' used as a variable", form.location)
            return self.symbol(form.name, scope)
        head, *args = form.children
        if isinstance(head, Symbol) and head.name in SPECIAL_FORMS:
            return getattr(self, "form_" + head.name.replace("*", "_star"))(form, args, scope)
        return self.application(head, args, scope)

    def symbol(self, name, scope):
        v = Variable.parse(name)
        if v not in scope and name in self.globals:
            return Global(name)
        return Var(v)

    def application(self, head, args, scope):
        f = self.expr(head, scope)
        xs = [self.expr(a, scope) for a in args]
        if not xs:
            return App(f, Lit(EMPTY))
        if (
            len(xs) == 2
            and isinstance(f, Global)
            and f.name in PAIR_PRIMITIVES
        ):
            return App(f, _apply(Global("cons"), xs))
        return _apply(f, xs)

    def _params(self, form, spec):
        if isinstance(spec, EmptyList):
            return [_DUMMY]
        if not isinstance(spec, ListForm) or not all(isinstance(p, Symbol) for p in spec.children):
            raise SyntaxFormError("lambda: parameter list must be a list of symbols", form.location)
        return [Variable.parse(p.name) for p in spec.children]

    def form_lambda(self, form, args, scope):
        if len(args) != 2:
            raise SyntaxFormError("lambda: expected (lambda (params...) body)", form.location)
        params = self._params(form, args[0])
        body = self.expr(args[1], scope | set(params))
        return _lam(params, body)

    def _bindings(self, form, spec, who):
        if isinstance(spec, EmptyList):
            return []
        ok = isinstance(spec, ListForm) and all(
            isinstance(b, ListForm) and len(b.children) == 2 and isinstance(b.children[0], Symbol)
            for b in spec.children
        )
        if not ok:
            raise SyntaxFormError(f"{who}: expected ({who} ((name expr) ...) body)", form.location)
        return [(Variable.parse(b.children[0].name), b.children[1]) for b in spec.children]

    def form_let(self, form, args, scope):
        if len(args) != 2:
            raise SyntaxFormError("let: expected (let ((name expr) ...) body)", form.location)
        pairs = self._bindings(form, args[0], "let")
        names = [n for n, _ in pairs]
        body = self.expr(args[1], scope | set(names))
        return _apply(_lam(names, body), [self.expr(e, scope) for _, e in pairs])

    def form_let_star(self, form, args, scope):
        if len(args) != 2:
            raise SyntaxFormError("let*: expected (let* ((name expr) ...) body)", form.location)
        pairs = self._bindings(form, args[0], "let*")
        inner = scope | {n for n, _ in pairs}
        body = self.expr(args[1], inner)
        for i in range(len(pairs) - 1, -1, -1):
            name, e = pairs[i]
            visible = scope | {n for n, _ in pairs[:i]}
            body = App(Lam(name, body), self.expr(e, visible))
        return body

    def form_letrec(self, form, args, scope):
        if len(args) != 2:
            raise SyntaxFormError("letrec: expected (letrec ((name expr) ...) body)", form.location)
        pairs = self._bindings(form, args[0], "letrec")
        if not pairs:
            return self.expr(args[1], scope)
        for _, e in pairs:
            if not (isinstance(e, ListForm) and isinstance(e.children[0], Symbol)
                    and e.children[0].name == "lambda"):
                raise SyntaxFormError("letrec: every bound expression must be a lambda", form.location)
        names = [n for n, _ in pairs]
        n = len(names)
        inner = scope | set(names)
        self_var, k, v, fix = Variable("%self"), Variable("%k"), Variable("%v"), Variable("%fix")
        # F = λself. λk. let name_i = λv. ((self sel_i) v) in (k e_1 ... e_n)
        etas = [Lam(v, App(App(Var(self_var), _selector(i, n)), Var(v))) for i in range(n)]
        tuple_body = _apply(Var(k), [self.expr(e, inner) for _, e in pairs])
        F = Lam(self_var, Lam(k, _apply(_lam(names, tuple_body), etas)))
        body = self.expr(args[1], inner)
        projections = [App(Var(fix), _selector(i, n)) for i in range(n)]
        return App(Lam(fix, _apply(_lam(names, body), projections)), App(_z_combinator(), F))

    def form_if(self, form, args, scope):
        if len(args) != 3:
            raise SyntaxFormError("if: expected (if test then else)", form.location)
        c, a, b = (self.expr(x, scope) for x in args)
        branches = _apply(Global("cons"), [Lam(_DUMMY, a), Lam(_DUMMY, b)])
        return App(App(c, branches), Lit(EMPTY))

    def form_list(self, form, args, scope):
        out = Lit(EMPTY)
        for a in reversed(args):
            out = _apply(Global("cons"), [self.expr(a, scope), out])
        return out

    def form_define(self, form, args, scope):
        raise SyntaxFormError("define is only allowed at top level", form.location)


def desugar(form, globals_=()):
    """Desugar one surface form into a core expression with ANF lambda bodies."""
    return to_anf(Desugarer(globals_)(form))


# -- recognizing Church encodings ---------------------------------------------


def as_pair(v):
    """Return ``(car, cdr)`` if ``v`` is a closure with the CONS shape, else None.

    The shape is ``λs. ((s a) d)`` closed over ``a`` and ``d``.
    """
    from .values import Closure

    if not isinstance(v, Closure):
        return None
    lam = v.lam
    body = lam.body
    if not isinstance(body, Anf) or len(body.bindings) != 2:
        return None
    b1, b2 = body.bindings
    r1, r2 = b1.rhs, b2.rhs
    if not (isinstance(r1, App) and isinstance(r2, App) and body.result == b2.target):
        return None
    if not (isinstance(r1.fn, Var) and r1.fn.var == lam.param and isinstance(r2.fn, Var)
            and r2.fn.var == b1.target):
        return None
    a, d = r1.arg.var, r2.arg.var
    if a == lam.param or d == lam.param or a not in v.env or d not in v.env:
        return None
    return v.env[a], v.env[d]


def _selector_index(lam):
    # λa.λb.a -> 0, λa.λb.b -> 1
    if not (isinstance(lam, Lam) and isinstance(lam.body, Anf)):
        return None
    inner = lam.body.bindings[0].rhs if len(lam.body.bindings) == 1 else None
    if not (isinstance(inner, Lam) and isinstance(inner.body, Anf) and len(inner.body.bindings) == 1):
        return None
    rhs = inner.body.bindings[0].rhs
    if not isinstance(rhs, Var):
        return None
    if rhs.var == lam.param and rhs.var != inner.param:
        return 0
    if rhs.var == inner.param:
        return 1
    return None


def as_boolean(v):
    """True/False for the CAR/CDR selector closures used as booleans, else None."""
    from .values import Closure

    if not isinstance(v, Closure) or v.env:
        return None
    body = v.lam.body
    if not isinstance(body, Anf) or len(body.bindings) != 2:
        return None
    b1, b2 = body.bindings
    if not (isinstance(b2.rhs, App) and b2.rhs.fn == Var(v.lam.param) and b2.rhs.arg == Var(b1.target)):
        return None
    idx = _selector_index(b1.rhs)
    return None if idx is None else idx == 0
