"""Acceptance criteria. Run with ``pytest tests/test_acceptance.py`` (or
execute this file); a PASS/FAIL line per criterion is printed at the end."""

import math
import random

import pytest

import test_runtime as algebra
from vlad.errors import ConformanceError
from vlad.stdlib import interpreter
from vlad.syntax import as_pair

from conftest import central_difference

PI = math.pi


@pytest.fixture(scope="module")
def vl():
    return interpreter()


def grad(vl, fn, x):
    return vl.load(f"(gradient {fn} {x!r})")


def fd(vl, fn, x, h=None):
    f = vl.load(fn)
    return central_difference(lambda t: vl.apply(f, t), x, h)


# name, program, points
CORPUS = [
    ("sqrt", "sqrt", [0.5, 2.0, 9.0]),
    ("exp", "exp", [-1.0, 0.0, 2.0]),
    ("log", "log", [0.5, 1.0, 3.0]),
    ("sin", "sin", [-1.0, 0.3, 2.0]),
    ("cos", "cos", [-1.0, 0.3, 2.0]),
    ("neg", "neg", [-2.0, 0.0, 3.0]),
    ("abs", "abs", [-2.0, 1.5]),
    ("log1pexp", "log1pexp", [-3.0, 0.0, 2.0, 10.0]),
    ("log1pexp-custom", "log1pexp-custom", [-3.0, 0.0, 2.0, 10.0, 1000.0]),
    ("one-sided", "one-sided", [0.25, 1.0, 4.0]),
    ("one-sided-custom", "one-sided-custom", [0.25, 1.0, 4.0]),
    ("sqrt-newton via fix", "sqrt-newton", [2.0, 4.0, 9.0]),
    ("sqrt-newton via fix-custom", "sqrt-newton-custom", [2.0, 4.0, 9.0]),
    ("map loss", "(lambda (a) (fold + 0 (map (lambda (x) (* a (sin x))) (list 1 2 3))))", [0.5, 2.0]),
    ("map-custom loss",
     "(lambda (a) (fold + 0 ((map-custom (lambda (x) (* a (sin (* a x))))) (list 1 2 3))))", [0.5, 2.0]),
    ("nested product", "(lambda (x) (* x (gradient (lambda (y) (* x y)) 7)))", [3.0, -1.5]),
    ("nested sine", "(lambda (x) (gradient (lambda (y) (sin (* x y))) 1))", [0.4, 2.0]),
    ("composite", "(lambda (x) (atan2 (sin x) (+ 2 (cos x))))", [-1.0, 0.5, 2.0]),
    ("recursion", "(lambda (x) (letrec ((pow (lambda (n) (if (= n 0) 1 (* x (pow (- n 1))))))) (pow 5)))",
     [0.7, 1.3]),
]


@pytest.mark.criterion(1, "gradient oracle suite matches central differences (rel 1e-4)")
def test_criterion_1_gradient_oracle_suite(vl, criterion):
    assert len(CORPUS) >= 15
    failures = []
    for name, prog, points in CORPUS:
        for x in points:
            g, d = grad(vl, prog, x), fd(vl, prog, x)
            if math.isfinite(g) and math.isfinite(d) and abs(g - d) > 1e-4 * abs(d):
                failures.append((name, x, g, d))
    assert not failures


@pytest.mark.criterion(2, "log1pexp: NaN at 1000; custom gives 1.0 at 1000 and 0.5 at 0")
def test_criterion_2_log1pexp(vl, criterion):
    assert math.isnan(grad(vl, "log1pexp", 1000.0))
    assert grad(vl, "log1pexp-custom", 1000.0) == 1.0
    assert abs(grad(vl, "log1pexp-custom", 0.0) - 0.5) <= 1e-12


@pytest.mark.criterion(3, "one-sided derivative at 0; naive and custom agree inside the domain")
def test_criterion_3_one_sided(vl, criterion):
    assert math.isnan(grad(vl, "one-sided", 0.0))
    assert abs(grad(vl, "one-sided-custom", 0.0) - 1.0) <= 1e-12
    for x in (0.25, 1.0, 4.0):
        assert abs(grad(vl, "one-sided", x) - grad(vl, "one-sided-custom", x)) <= 1e-10


def backward_steps(vl, fn_text, x0):
    """Apply steps used by the backpropagator of ``fn_text`` evaluated at ``x0``."""
    f = vl.load(fn_text)
    _, bp = as_pair(vl.apply(vl.j(f), vl.j(x0)))
    before = vl.steps
    vl.apply(bp, 1.0)
    return vl.steps - before


def adjoint_iterations(c, dxs=1.0):
    """Iterations of u -> dxs + c u from u = dxs until successive values are within 1e-6."""
    u, n = dxs, 0
    while True:
        n += 1
        u2 = dxs + c * u
        if abs(u - u2) < 1e-6:
            return n
        u = u2


@pytest.mark.criterion(4, "fixed point: gradient 0.25 via fix and fix-custom; backward cost checks")
def test_criterion_4_fixed_point(vl, criterion):
    naive, custom = grad(vl, "sqrt-newton", 4.0), grad(vl, "sqrt-newton-custom", 4.0)
    assert abs(naive - 0.25) <= 1e-4 and abs(custom - 0.25) <= 1e-4
    assert abs(naive - custom) <= 1e-6

    vl.load("(define affine (lambda (c b) (lambda (x) (+ (* c x) b))))")
    # backward cost against adjoint iteration count for contractions of rate c
    rows = []
    for c in (0.5, 0.7, 0.8, 0.9, 0.95):
        steps = backward_steps(vl, f"(fix-custom newton-close? (affine {c} 1))", 0.0)
        rows.append((adjoint_iterations(c), steps))
    n = [r[0] for r in rows]
    s = [r[1] for r in rows]
    mean_n, mean_s = sum(n) / len(n), sum(s) / len(s)
    slope = sum((a - mean_n) * (b - mean_s) for a, b in rows) / sum((a - mean_n) ** 2 for a in n)
    for (n1, s1), (n2, s2) in zip(rows, rows[1:]):
        assert abs((s2 - s1) / (n2 - n1) - slope) <= 0.2 * slope
    intercept = mean_s - slope * mean_n
    for a, b in rows:
        assert abs(b - (slope * a + intercept)) <= 0.2 * b

    # independent of how many forward iterations ran (and so were not kept)
    fn = "(fix-custom newton-close? (affine 0.8 1))"
    near, far = backward_steps(vl, fn, 5.0), backward_steps(vl, fn, 1e6)
    assert near == far
    naive_fn = "((lambda (f) (lambda (x) (fix newton-close? f x))) (affine 0.8 1))"
    assert backward_steps(vl, naive_fn, 1e6) > backward_steps(vl, naive_fn, 5.0)


def sin_approx_error(vl, samples=4097):
    xs = [-PI + 2 * PI * i / (samples - 1) for i in range(samples)]
    return max(abs(vl.load(f"(sin-approx {x!r})") - math.sin(x)) for x in xs)


@pytest.mark.criterion(5, "sin-approx: naive second derivative piecewise constant; custom within 2 eps")
def test_criterion_5_sin_approx(vl, criterion):
    second = "(lambda (x) (gradient sin-approx x))"
    width = 2 * PI / 32
    x0 = -PI + 20 * width
    inside = [grad(vl, second, x0 + t * width) for t in (0.3, 0.7)]
    across = grad(vl, second, x0 + 1.3 * width)
    assert inside[0] == inside[1]
    assert across != inside[0]

    eps = sin_approx_error(vl)
    custom = "(lambda (x) (gradient sin-custom x))"
    for i in range(64):
        x = -PI + 2 * PI * (i + 0.5) / 64
        assert abs(grad(vl, custom, x) + vl.load(f"(sin-approx {x!r})")) <= 2 * eps


@pytest.mark.criterion(6, "algebra property tests (1000 cases each)")
def test_criterion_6_algebra(criterion):
    algebra.test_j_inverse_after_j_is_identity()
    algebra.test_j_after_j_inverse_on_reverse_values()
    algebra.test_custom_projection_rules()
    algebra.test_custom_j_rules()
    algebra.test_zero_is_identity_on_plain_data()
    algebra.test_monoid_laws()
    algebra.test_non_conformant_always_errors_with_path()
    with pytest.raises(ConformanceError) as info:
        algebra.IT.plus(algebra.IT.cons(1.0, 2.0), algebra.IT.cons(1.0, algebra.EMPTY))
    assert info.value.path == ("cdr",)


@pytest.mark.criterion(7, "map-custom matches map (1e-10) and its closure sensitivity matches FD (1e-4)")
def test_criterion_7_map(vl, criterion):
    rng = random.Random(7)
    body = "(lambda (x) (* a (sin (* a x))))"
    for trial in range(40):
        n = rng.randint(0, 32) if trial > 1 else trial * 32
        xs = " ".join(repr(rng.uniform(-3, 3)) for _ in range(n))
        a = rng.uniform(-2, 2)
        plain = f"(lambda (a) (fold + 0 (map {body} (list {xs}))))"
        custom = f"(lambda (a) (fold + 0 ((map-custom {body}) (list {xs}))))"
        assert abs(grad(vl, plain, a) - grad(vl, custom, a)) <= 1e-10

    # closure sensitivity of f read out of the map-custom backpropagator
    values = [rng.uniform(-3, 3) for _ in range(12)]
    a0 = 0.8
    f = vl.load(f"((lambda (a) {body}) {a0!r})")
    mapped = vl.apply(vl.globals["map-custom"], f)
    _, bp = as_pair(vl.apply(vl.j(mapped), vl.j(vl.make_list(values))))
    sens = vl.make_list([])
    for _ in values:
        sens = vl.make_list([1.0, sens])
    closure_sens, _ = as_pair(vl.apply(bp, sens))
    (df,) = vl.list_items(closure_sens)
    (da,) = vl.list_items(df)

    def loss(a):
        return sum(a * math.sin(a * x) for x in values)

    assert abs(da - central_difference(loss, a0)) <= 1e-4


@pytest.mark.criterion(8, "nesting: gradient of x * (gradient of x*y at 7) at 3 is 6")
def test_criterion_8_nesting(vl, criterion):
    v = grad(vl, "(lambda (x) (* x (gradient (lambda (y) (* x y)) 7)))", 3.0)
    assert abs(v - 6.0) <= 1e-9


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
