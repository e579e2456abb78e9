"""Exception hierarchy shared by the reader, evaluator and CLI."""


class VladError(Exception):
    """Base class for every error the language can report."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.message = message
        self.location = location

    def __str__(self):
        if self.location is None:
            return self.message
        line, col = self.location
        return f"{line}:{col}: {self.message}"


class ParseError(VladError):
    pass


class SyntaxFormError(VladError):
    """A special form with the wrong shape, e.g. ``(if a b)``."""


class EvalError(VladError):
    """Language-level runtime error (CLI exit status 1)."""


class UnboundVariable(EvalError):
    pass


class NotAFunction(EvalError):
    pass


class ArityError(EvalError):
    pass


class NotReverseTagged(EvalError):
    pass


class ConformanceError(EvalError):
    """Raised by the accumulation operator on values of different shape.

    ``path`` lists the steps from the root of both operands to the
    mismatch, outermost first.
    """

    def __init__(self, left, right, path=()):
        self.left = left
        self.right = right
        self.path = tuple(path)
        where = " of ".join(reversed(self.path)) if self.path else "top level"
        super().__init__(f"cannot add {left} and {right} (at {where})")


class ResourceError(VladError):
    """Evaluation ran out of its step budget (CLI exit status 2)."""
