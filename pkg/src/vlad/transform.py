"""Reverse-mode source transformation of ANF lambdas.

A lambda ``λx0. let x1 = e1 ... let xn = en in xn`` becomes a lambda over
the reverse-tagged parameter that runs the forward bindings and returns the
pair ``(reverse xn, backpropagator)``. The backpropagator zero-initializes
the sensitivities it will accumulate into, replays the bindings in reverse,
and returns ``(closure sensitivities, parameter sensitivity)``.

Generated code is plain ANF: destructuring binds become a fresh temporary
plus ``car``/``cdr`` applications, and every ⊕-accumulation binds a fresh
temporary, so binding targets stay unique.
"""

from .errors import EvalError, UnboundVariable
from .reader import parse_one
from .syntax import (
    Anf,
    App,
    Binding,
    Desugarer,
    Global,
    Lam,
    Lit,
    Var,
    Variable,
    to_anf,
)
from .values import EMPTY, Kind

CAR, CDR, CONS = Global("car"), Global("cdr"), Global("cons")
ZERO, PLUS = Global("zero"), Global("plus")
RAD, RAD_INVERSE = Global("rad"), Global("rad-inverse")


class TransformCache:
    """Identity-keyed memo of transformed lambdas, one per interpreter."""

    def __init__(self):
        self._entries = {}

    def get(self, lam):
        hit = self._entries.get(id(lam))
        return None if hit is None else hit[1]

    def put(self, lam, out):
        self._entries[id(lam)] = (lam, out)

    def __len__(self):
        return len(self._entries)


def transform_lambda(lam, cache=None):
    if cache is None:
        cache = TransformCache()
    hit = cache.get(lam)
    if hit is not None:
        return hit
    out = _LambdaTransform(lam, cache).build()
    cache.put(lam, out)
    return out


class _LambdaTransform:
    def __init__(self, lam, cache):
        if not isinstance(lam.body, Anf):
            lam = to_anf(lam)
        self.lam = lam
        self.cache = cache
        self.rparam = lam.param.reverse()
        # Temporaries carry the reverse-tagged parameter's tags, and a base
        # that encodes the tag count, so re-transforming generated code
        # never captures them.
        self.prefix = f"%r{len(self.rparam.tags)}_"
        self.count = 0

    def temp(self):
        self.count += 1
        return Variable(f"{self.prefix}{self.count}", self.rparam.tags)

    def bind(self, out, rhs, target=None):
        target = target or self.temp()
        out.append(Binding(target, rhs))
        return target

    def call(self, out, fn, arg):
        return self.bind(out, App(Var(fn), Var(arg)))

    def call_global(self, out, g, arg):
        return self.call(out, self.bind(out, g), arg)

    def cons(self, out, a, d):
        return self.call(out, self.call_global(out, CONS, a), d)

    # -- forward ------------------------------------------------------------

    def phi(self, b):
        out = []
        rhs = b.rhs
        target = b.target.reverse()
        if isinstance(rhs, Var):
            out.append(Binding(target, Var(rhs.var.reverse())))
        elif isinstance(rhs, Lit):
            out.append(Binding(target, Lit(rhs.value, rhs.depth + 1)))
        elif isinstance(rhs, Global):
            out.append(Binding(target, Global(rhs.name, rhs.depth + 1)))
        elif isinstance(rhs, Lam):
            out.append(Binding(target, transform_lambda(rhs, self.cache)))
        elif isinstance(rhs, App):
            pair = self.bind(out, App(Var(rhs.fn.var.reverse()), Var(rhs.arg.var.reverse())))
            self.bind(out, App(Var(self.bind(out, CAR)), Var(pair)), target)
            self.bind(out, App(Var(self.bind(out, CDR)), Var(pair)), b.target.backpropagator())
        else:
            raise TypeError(f"bad binding {b!r}")
        return out

    # -- backward -----------------------------------------------------------

    def accumulate(self, out, cur, x, value):
        pair = self.cons(out, cur[x], value)
        cur[x] = self.call_global(out, PLUS, pair)

    def rho(self, b, out, cur):
        rhs = b.rhs
        sens = cur[b.target]
        if isinstance(rhs, Var):
            self.accumulate(out, cur, rhs.var, sens)
        elif isinstance(rhs, App):
            t = self.call(out, b.target.backpropagator(), sens)
            sj = self.call_global(out, CAR, t)
            sk = self.call_global(out, CDR, t)
            self.accumulate(out, cur, rhs.fn.var, sj)
            self.accumulate(out, cur, rhs.arg.var, sk)
        elif isinstance(rhs, Lam):
            free = rhs.bree
            for x, e in zip(free, self.unpack(out, sens, len(free), rhs.param)):
                self.accumulate(out, cur, x, e)
        # constants have no sensitivity to propagate

    def unpack(self, out, var, count, tagvar):
        """Destructure the tagged list ``var`` into ``count`` element variables."""
        if count == 0:
            return []
        if tagvar.reverse_depth == 0:
            elems = []
            for i in range(count):
                elems.append(self.call_global(out, CAR, var))
                if i < count - 1:
                    var = self.call_global(out, CDR, var)
            return elems
        inner = self.unpack(out, self.call_global(out, RAD_INVERSE, var), count, tagvar.unreverse())
        return [self.call_global(out, RAD, e) for e in inner]

    def pack(self, out, items, tagvar):
        """Build the tagged list of ``items`` according to the tags on ``tagvar``."""
        if tagvar.reverse_depth == 0:
            acc = self.bind(out, Lit(EMPTY))
            for item in reversed(items):
                acc = self.cons(out, item, acc)
            return acc
        untagged = [self.call_global(out, RAD_INVERSE, item) for item in items]
        return self.call_global(out, RAD, self.pack(out, untagged, tagvar.unreverse()))

    def backpropagator(self):
        lam = self.lam
        body = lam.body
        targets = [b.target for b in body.bindings]
        result = body.result
        if not targets or targets[-1] != result:
            raise AssertionError("ANF body must end by returning its last binding")
        param = result.sensitivity()
        out, cur = [], {}
        for x in list(lam.bree) + [lam.param] + targets[:-1]:
            arg = self.call_global(out, RAD_INVERSE, x.reverse())
            cur[x] = self.bind(out, App(Var(self.bind(out, ZERO)), Var(arg)), x.sensitivity())
        cur[result] = param
        for b in reversed(body.bindings):
            self.rho(b, out, cur)
        closure_sens = self.pack(out, [cur[x] for x in lam.bree], lam.param)
        res = self.cons(out, closure_sens, cur[lam.param])
        return Lam(param, Anf(tuple(out), res))

    def build(self):
        fwd = []
        for b in self.lam.body.bindings:
            fwd.extend(self.phi(b))
        bp = self.bind(fwd, self.backpropagator())
        res = self.cons(fwd, self.lam.body.result.reverse(), bp)
        return Lam(self.rparam, Anf(tuple(fwd), res), source=self.lam)


def phi(binding, cache=None):
    """Forward-pass bindings for one ANF binding (fresh temporaries numbered from 1)."""
    ctx = _LambdaTransform(Lam(Variable("%phi"), Anf((binding,), binding.target)), cache or TransformCache())
    return ctx.phi(binding)


def rho(binding, sensitivities=None, cache=None):
    """Backward-pass bindings for one ANF binding.

    ``sensitivities`` maps variables to the variables currently holding
    their sensitivity; it is updated in place and defaults to the
    sensitivity-tagged variables.
    """
    ctx = _LambdaTransform(Lam(Variable("%rho"), Anf((binding,), binding.target)), cache or TransformCache())
    rhs = binding.rhs
    cur = sensitivities if sensitivities is not None else {}
    involved = [binding.target]
    if isinstance(rhs, Var):
        involved.append(rhs.var)
    elif isinstance(rhs, App):
        involved += [rhs.fn.var, rhs.arg.var]
    elif isinstance(rhs, Lam):
        involved += list(rhs.bree)
    for x in involved:
        cur.setdefault(x, x.sensitivity())
    out = []
    ctx.rho(binding, out, cur)
    return out


def transform_env(env, lam, j):
    """Environment of ``J`` applied to a closure: ``reverse x ↦ j(env[x])``.

    Support functions the generated code needs (cons, car, ⊕, 0, ...) are
    referenced as globals, so no extra entries are required.
    """
    out = {}
    for x in lam.free:
        if x not in env:
            raise UnboundVariable(f"unbound variable {x}")
        out[x.reverse()] = j(env[x])
    return out


def inverse_env(env, lam, j_inverse):
    """Environment of the untransformed closure: ``x ↦ j_inverse(env[reverse x])``."""
    return {x: j_inverse(env[x.reverse()]) for x in lam.free}


# -- transformed primitives -----------------------------------------------------

_UNARY = """
(lambda (a%r)
  (let ((x (rad-inverse a%r)))
    (cons (rad ({name} x)) (lambda (dy) (cons () (* {d} dy))))))
"""

_BINARY = """
(lambda (a%r)
  (let* ((z (rad-inverse a%r)) (x1 (car z)) (x2 (cdr z)))
    (cons (rad ({name} z))
          (lambda (dy) (cons () (list (* {d1} dy) (* {d2} dy)))))))
"""

_UNARY_ZERO = """
(lambda (a%r)
  (let ((x (rad-inverse a%r)))
    (cons (rad ({name} x)) (lambda (dy) (cons () (zero x))))))
"""

_BINARY_BOOL = """
(lambda (a%r)
  (let* ((z (rad-inverse a%r)) (x1 (car z)) (x2 (cdr z)))
    (cons (rad ({name} z)) (lambda (dy) (cons () (list (zero x1) (zero x2)))))))
"""

_PLUS = """
(lambda (a%r)
  (let ((z (rad-inverse a%r)))
    (cons (rad (plus z)) (lambda (dy) (cons () (list dy dy))))))
"""

_RAD = """
(lambda (a%r)
  (let ((x (rad-inverse a%r)))
    (cons (rad (rad x)) (lambda (dy) (cons () (%unrad-sensitivity x dy))))))
"""

_RAD_INVERSE = """
(lambda (a%r)
  (let ((x (rad-inverse a%r)))
    (cons (rad (rad-inverse x)) (lambda (dy) (cons () (%rad-sensitivity x dy))))))
"""

# The attached derivative receives a zero sensitivity; see README.
_ATTACH = """
(lambda (a%r)
  (let* ((z (rad-inverse a%r)) (x1 (car z)) (x2 (cdr z)))
    (cons (rad (attach-derivative z)) (lambda (dy) (cons () (list dy (zero x2)))))))
"""

UNARY_DERIVATIVES = {
    "sqrt": "(/ 0.5 (sqrt x))",
    "exp": "(exp x)",
    "log": "(/ 1 x)",
    "sin": "(cos x)",
    "cos": "(neg (sin x))",
    "neg": "-1",
    "abs": "(if (< x 0) -1 (if (> x 0) 1 0))",
}

_NORM = "(+ (* x1 x1) (* x2 x2))"
BINARY_PARTIALS = {
    "+": ("1", "1"),
    "-": ("1", "-1"),
    "*": ("x2", "x1"),
    "/": ("(/ 1 x2)", "(neg (/ (/ x1 x2) x2))"),
    "atan2": (f"(/ x2 {_NORM})", f"(neg (/ x1 {_NORM}))"),
}


def primitive_source(tag):
    """Source text of the lambda implementing the transformed primitive."""
    kind = tag.kind
    if kind is Kind.UNARY:
        return _UNARY.format(name=tag.name, d=UNARY_DERIVATIVES[tag.name])
    if kind is Kind.BINARY:
        d1, d2 = BINARY_PARTIALS[tag.name]
        return _BINARY.format(name=tag.name, d1=d1, d2=d2)
    if kind in (Kind.UNARY_BOOL, Kind.ZERO):
        return _UNARY_ZERO.format(name=tag.name)
    if kind is Kind.BINARY_BOOL:
        return _BINARY_BOOL.format(name=tag.name)
    if kind is Kind.PLUS:
        return _PLUS
    if kind is Kind.J:
        return _RAD
    if kind is Kind.JINV:
        return _RAD_INVERSE
    if kind is Kind.ATTACH:
        return _ATTACH
    if kind in (Kind.SENS_J, Kind.SENS_JINV):
        raise EvalError("rad: differentiating through the derivative of rad is not supported")
    raise ValueError(f"no transform for {tag}")


def transform_primitive(tag, globals_):
    """The lambda whose closure in σ0 is the transformed primitive ``tag``.

    ``globals_`` are the names resolved as top-level references.
    """
    lam = Desugarer(globals_)(parse_one(primitive_source(tag), allow_reserved=True))
    lam = to_anf(lam)
    return Lam(lam.param, lam.body, primitive=tag)
