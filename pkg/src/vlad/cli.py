"""Command-line front end: ``vlad run | repl | gradcheck``."""

import argparse
import logging
import math
import sys
from dataclasses import dataclass

from . import stdlib
from .errors import ParseError, ResourceError, VladError
from .printer import format_real, print_expr, print_value
from .reader import ListForm, Symbol, parse
from .runtime import DEFAULT_STEPS
from .syntax import to_anf
from .transform import transform_lambda, transform_primitive
from .values import Closure, Custom, Primitive

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_RESOURCE = 2


@dataclass
class RunConfig:
    path: str = None
    steps: int = DEFAULT_STEPS
    stdlib: bool = True
    mode: str = "value"  # value | transformed | trace

    def __post_init__(self):
        if self.steps <= 0:
            raise ValueError("--steps must be positive")


def make_interpreter(config):
    if config.mode == "trace":
        logging.basicConfig(level=logging.DEBUG, format="%(message)s", stream=sys.stderr)
    return stdlib.interpreter(config.steps, trace=config.mode == "trace", stdlib=config.stdlib)


def transformed_source(interp, v):
    """Printed reverse transform of a function value."""
    while isinstance(v, Custom):
        v = v.primal
    if isinstance(v, Closure):
        return print_expr(transform_lambda(v.lam, interp.transforms))
    if isinstance(v, Primitive):
        return print_expr(transform_primitive(v.tag, interp.globals))
    raise VladError(f"cannot transform a non-function value {print_value(v)}")


def report(err, out=sys.stderr):
    """Print ``err`` and return the exit status it maps to."""
    if isinstance(err, RecursionError):
        print("error: value nested too deeply", file=out)
        return EXIT_RESOURCE
    print(f"error: {err}", file=out)
    return EXIT_RESOURCE if isinstance(err, ResourceError) else EXIT_ERROR


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _defined_names(forms):
    for f in forms:
        if (isinstance(f, ListForm) and len(f.children) == 3 and isinstance(f.children[0], Symbol)
                and f.children[0].name == "define" and isinstance(f.children[1], Symbol)):
            yield f.children[1].name


def run(config, out=sys.stdout, err=sys.stderr):
    try:
        text = _read(config.path)
    except OSError as e:
        print(f"error: {config.path}: {e.strerror}", file=err)
        return EXIT_ERROR
    try:
        interp = make_interpreter(config)
        forms = parse(text)
        value = interp.run_forms(forms)
        if config.mode == "transformed":
            for name in _defined_names(forms):
                v = interp.globals[name]
                if isinstance(v, (Closure, Custom, Primitive)):
                    print(f"; {name}", file=out)
                    print(transformed_source(interp, v), file=out)
            if isinstance(value, (Closure, Custom, Primitive)):
                print(transformed_source(interp, value), file=out)
        print(print_value(value), file=out)
    except (VladError, RecursionError) as e:
        return report(e, err)
    return EXIT_OK


# -- REPL ---------------------------------------------------------------------------


def _incomplete(text):
    try:
        parse(text)
    except ParseError as e:
        return "never closed" in str(e)
    return False


def repl(config, inp=sys.stdin, out=sys.stdout):
    interp = make_interpreter(config)
    buf = ""
    while True:
        out.write("... " if buf else "> ")
        out.flush()
        line = inp.readline()
        if not line:
            out.write("\n")
            return EXIT_OK
        buf += line
        if _incomplete(buf):
            continue
        text, buf = buf.strip(), ""
        if not text:
            continue
        if text in (":quit", ":q"):
            return EXIT_OK
        try:
            if text.startswith(":transform"):
                value = interp.load(text[len(":transform"):])
                print(transformed_source(interp, value), file=out)
            elif text.startswith(":"):
                print(f"error: unknown command {text.split()[0]}", file=out)
            else:
                print(print_value(interp.load(text)), file=out)
        except (VladError, RecursionError) as e:
            report(e, out)


# -- gradient checking --------------------------------------------------------------


@dataclass
class CheckRow:
    point: float
    value: float
    grad: float
    fd: float
    abs_err: float
    rel_err: float
    status: str

    def line(self):
        nums = (self.point, self.value, self.grad, self.fd, self.abs_err, self.rel_err)
        return " ".join(_num(x) for x in nums) + " " + self.status


def _num(x):
    return format_real(x) if not math.isfinite(x) else f"{x:.10g}"


def _scalar(interp, f, x):
    y = interp.apply(f, x)
    if type(y) is not float:
        raise VladError(f"function returned {print_value(y)}, not a real")
    return y


def _safe(interp, f, x):
    try:
        return _scalar(interp, f, x)
    except ResourceError:
        raise
    except VladError:
        return math.nan


def finite_difference(interp, f, x, h=None):
    """Central difference at ``x``; one-sided forward difference when f(x-h) is undefined.

    Returns ``(estimate, one_sided)``.
    """
    h = h or 1e-6 * max(1.0, abs(x))
    below = _safe(interp, f, x - h)
    if math.isnan(below):
        # forward differences are only first-order accurate and boundaries
        # usually have fractional-power behaviour, so use a much smaller step
        k = h * 1e-4
        return (_safe(interp, f, x + k) - _safe(interp, f, x)) / k, True
    return (_safe(interp, f, x + h) - below) / (2 * h), False


def check_point(interp, f, x, h=None, tol=1e-4):
    value = _scalar(interp, f, x)
    grad = interp.gradient(f, x)
    if type(grad) is not float:
        raise VladError(f"gradient is {print_value(grad)}, not a real")
    fd, one_sided = finite_difference(interp, f, x, h)
    flags = ["one-sided"] if one_sided else []
    if math.isnan(grad) and math.isnan(fd):
        abs_err = rel_err = 0.0
        ok = True
        flags.append("nan-agree")
    else:
        abs_err = abs(grad - fd)
        rel_err = abs_err / max(1.0, abs(fd))
        ok = rel_err <= tol
        if not (math.isfinite(grad) and math.isfinite(fd)):
            # only finite points are judged
            flags.append("not-finite")
            ok = True
    status = ("pass" if ok else "FAIL") + "".join(f",{fl}" for fl in flags)
    return CheckRow(x, value, grad, fd, abs_err, rel_err, status)


def gradcheck(config, name, points, h=None, tol=1e-4, out=sys.stdout, err=sys.stderr):
    try:
        interp = make_interpreter(config)
        if config.path:
            interp.load(_read(config.path))
        if name not in interp.globals:
            print(f"error: unknown function {name}", file=err)
            return EXIT_ERROR
        f = interp.lookup_global(name)
        print("point value grad fd abs_err rel_err status", file=out)
        failed = False
        for x in points:
            row = check_point(interp, f, float(x), h, tol)
            failed |= row.status.startswith("FAIL")
            print(row.line(), file=out)
    except OSError as e:
        print(f"error: {config.path}: {e.strerror}", file=err)
        return EXIT_ERROR
    except (VladError, RecursionError) as e:
        return report(e, err)
    return EXIT_ERROR if failed else EXIT_OK


# -- entry point --------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--no-stdlib", action="store_true", help="do not load the standard library")
    common.add_argument("--steps", type=int, default=DEFAULT_STEPS,
                        help="apply-step budget per top-level form (default %(default)s)")
    common.add_argument("--trace", action="store_true", help="log every application to stderr")

    parser = argparse.ArgumentParser(prog="vlad", description="Reverse-mode AD interpreter.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="evaluate a program and print its last value")
    p.add_argument("path")
    p.add_argument("--emit-transformed", action="store_true",
                   help="also print the reverse-transformed source of defined functions")

    sub.add_parser("repl", parents=[common], help="interactive read-eval-print loop")

    p = sub.add_parser("gradcheck", parents=[common],
                       help="compare gradients with finite differences")
    p.add_argument("path", nargs="?", help="program defining the function (optional)")
    p.add_argument("--fn", required=True, help="name of a real-to-real function")
    p.add_argument("--at", type=float, nargs="+", required=True, metavar="X")
    p.add_argument("--h", type=float, default=None, help="step (default 1e-6*max(1,|x|))")
    p.add_argument("--tol", type=float, default=1e-4, help="relative tolerance")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.steps <= 0:
        print("error: --steps must be positive", file=sys.stderr)
        return EXIT_ERROR
    mode = "trace" if args.trace else "value"
    if getattr(args, "emit_transformed", False):
        mode = "transformed"
    config = RunConfig(getattr(args, "path", None), args.steps, not args.no_stdlib, mode)
    if args.command == "run":
        return run(config)
    if args.command == "repl":
        return repl(config)
    return gradcheck(config, args.fn, args.at, args.h, args.tol)


if __name__ == "__main__":
    sys.exit(main())
