"""An interpreter for a small lambda calculus with reverse-mode AD and
programmer-attached custom derivatives."""

from .errors import (
    ConformanceError,
    EvalError,
    ParseError,
    ResourceError,
    SyntaxFormError,
    VladError,
)
from .printer import print_expr, print_value
from .reader import parse
from .runtime import Interpreter, sigma0
from .stdlib import interpreter

__all__ = [
    "ConformanceError",
    "EvalError",
    "Interpreter",
    "ParseError",
    "ResourceError",
    "SyntaxFormError",
    "VladError",
    "interpreter",
    "parse",
    "print_expr",
    "print_value",
    "sigma0",
]
