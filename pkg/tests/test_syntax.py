import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vlad.errors import SyntaxFormError
from vlad.reader import parse_one
from vlad.runtime import Interpreter
from vlad.syntax import (
    Anf,
    App,
    Binding,
    Global,
    Lam,
    Lit,
    Tag,
    Var,
    Variable,
    bree,
    compare_vars,
    desugar,
    free_vars,
    to_anf,
)
from vlad.transform import transform_lambda
from vlad.values import EMPTY

GLOBALS = set(Interpreter().globals)
V = Variable
x, y, a, f, g, p = (V(n) for n in "xyafgp")
T1, T2 = V("%t1"), V("%t2")


def ds(text):
    return desugar(parse_one(text), GLOBALS)


def test_let_is_application_of_lambda():
    assert ds("(let ((x 3)) x)") == App(Lam(x, Anf((Binding(T1, Var(x)),), T1)), Lit(3.0))


def test_if_uses_church_pair_of_thunks():
    e = ds("(if c a b)")
    assert isinstance(e, App) and e.arg == Lit(EMPTY)
    sel = e.fn
    assert sel.fn == Var(V("c"))
    pair = sel.arg
    assert pair.fn.fn == Global("cons")
    then, other = pair.fn.arg, pair.arg
    assert then.body.bindings[0].rhs == Var(a) and other.body.bindings[0].rhs == Var(V("b"))
    assert then.param.base.startswith("%")


def test_identity_lambda():
    assert ds("(λ (x) x)") == Lam(x, Anf((Binding(T1, Var(x)),), T1))


def test_binary_primitive_takes_pair():
    e = ds("(+ x y)")
    assert e.fn == Global("+")
    assert e.arg == App(App(Global("cons"), Var(x)), Var(y))


def test_multi_argument_lambda_curries():
    e = ds("(lambda (x y) x)")
    assert e.param == x
    inner = e.body.bindings[0].rhs
    assert isinstance(inner, Lam) and inner.param == y


def test_zero_argument_call_passes_empty():
    assert ds("(f)") == App(Var(f), Lit(EMPTY))


@pytest.mark.parametrize(
    "text,form",
    [("(let ((x)) x)", "let"), ("(if a b)", "if"), ("(lambda x)", "lambda"),
     ("(letrec ((f 3)) f)", "letrec"), ("(let* (x) x)", "let*")],
)
def test_malformed_forms_name_the_form(text, form):
    with pytest.raises(SyntaxFormError) as info:
        ds(text)
    assert str(info.value).split(": ", 1)[1].startswith(form)


def test_anf_orders_operator_before_operand():
    lam = ds("(lambda (x) (f (g x)))")
    assert lam.body == Anf(
        (Binding(T1, App(Var(g), Var(x))), Binding(T2, App(Var(f), Var(T1)))), T2
    )


def test_anf_nested_lambda_is_one_binding():
    lam = ds("(lambda (x) (lambda (y) (x y)))")
    (b,) = lam.body.bindings
    assert isinstance(b.rhs, Lam)
    assert b.rhs.body == Anf((Binding(T1, App(Var(x), Var(y))),), T1)


def test_anf_alias_body():
    assert ds("(lambda (x) x)").body == Anf((Binding(T1, Var(x)),), T1)


def test_free_vars():
    assert free_vars(ds("(lambda (x) x)")) == []
    assert free_vars(App(Var(x), Var(y))) == [x, y]
    # top-level names are constants, not free variables
    assert free_vars(ds("(lambda (x) (+ x a))")) == [a]


def test_bree_untagged_equals_free_vars():
    lam = ds("(lambda (x) (+ (* x b) a))")
    assert bree(lam) == [a, V("b")]


def test_bree_of_transformed_lambda_is_reverse_tagged():
    lam = ds("(lambda (x) (+ x a))")
    t = transform_lambda(lam)
    assert bree(t) == [a.reverse()]
    tt = transform_lambda(t)
    assert bree(tt) == [a.reverse().reverse()]


def test_bree_of_transformed_primitive_is_empty():
    it = Interpreter()
    for name in ("exp", "+", "plus", "rad", "attach-derivative"):
        assert bree(it.j(it.globals[name]).lam) == []


def test_compare_vars_examples():
    assert compare_vars(f, p) == -1
    assert compare_vars(x, x.reverse()) == -1
    assert sorted([p, f]) == [f, p]
    assert compare_vars(x.reverse(), x.sensitivity()) == -1
    assert compare_vars(x.sensitivity(), x.backpropagator()) == -1


def test_variable_text_round_trip():
    v = V("x", [Tag.REVERSE, Tag.SENSITIVITY])
    assert str(v) == "x%r%s"
    assert V.parse(str(v)) == v
    assert V.parse("%t3%r") == V("%t3", [Tag.REVERSE])


variables = st.builds(
    Variable,
    st.sampled_from(["a", "b", "f", "x", "%t1"]),
    st.lists(st.sampled_from(list(Tag)), max_size=3),
)


@settings(max_examples=1000)
@given(variables, variables, variables)
def test_compare_vars_is_strict_total_order(u, v, w):
    assert compare_vars(u, u) == 0
    assert compare_vars(u, v) == -compare_vars(v, u)
    assert (compare_vars(u, v) == 0) == (u == v)
    if compare_vars(u, v) < 0 and compare_vars(v, w) < 0:
        assert compare_vars(u, w) < 0


@settings(max_examples=1000)
@given(variables, variables)
def test_compare_vars_prefix_and_kind_order(u, v):
    if u.base != v.base:
        assert (compare_vars(u, v) < 0) == (u.base < v.base)
    elif u.tags != v.tags and v.tags[: len(u.tags)] == u.tags:
        assert compare_vars(u, v) < 0


# random surface programs over a few names
names = st.sampled_from(["x", "y", "z", "+", "car", "a"])
exprs = st.recursive(
    st.one_of(names, st.sampled_from(["1", "2.5", "()"])),
    lambda inner: st.one_of(
        st.tuples(inner, inner).map(lambda t: f"({t[0]} {t[1]})"),
        st.tuples(st.sampled_from(["x", "y", "z"]), inner).map(lambda t: f"(lambda ({t[0]}) {t[1]})"),
        st.tuples(st.sampled_from(["x", "y"]), inner, inner).map(lambda t: f"(let (({t[0]} {t[1]})) {t[2]})"),
        st.tuples(inner, inner, inner).map(lambda t: f"(if {t[0]} {t[1]} {t[2]})"),
    ),
    max_leaves=12,
)


def _lambdas(e):
    if isinstance(e, Lam):
        yield e
        if isinstance(e.body, Anf):
            for b in e.body.bindings:
                yield from _lambdas(b.rhs)
    elif isinstance(e, App):
        yield from _lambdas(e.fn)
        yield from _lambdas(e.arg)


def _variables(e):
    if isinstance(e, Var):
        yield e.var
    elif isinstance(e, App):
        yield from _variables(e.fn)
        yield from _variables(e.arg)
    elif isinstance(e, Lam):
        yield e.param
        yield from _variables(e.body)
    elif isinstance(e, Anf):
        yield e.result
        for b in e.bindings:
            yield b.target
            yield from _variables(b.rhs)


@settings(max_examples=1000, deadline=None)
@given(exprs)
def test_desugar_invariants(text):
    e = ds(text)
    assert to_anf(e) == e
    assert to_anf(to_anf(e)) == to_anf(e)
    for v in _variables(e):
        assert all(t is Tag.REVERSE for t in v.tags)
    for lam in _lambdas(e):
        body = lam.body
        assert isinstance(body, Anf) and body.bindings[-1].target == body.result
        targets = [b.target for b in body.bindings]
        assert len(set(targets)) == len(targets)
        assert set(bree(lam)) == set(free_vars(lam))
        assert bree(lam) == sorted(bree(lam))
