"""Access to the bundled ``stdlib.vl`` library."""

from importlib import resources

from .runtime import Interpreter

STDLIB_NAME = "stdlib.vl"


def source():
    """The library's source text."""
    return resources.files(__package__).joinpath(STDLIB_NAME).read_text(encoding="utf-8")


def load(interp):
    """Evaluate the library into ``interp``'s globals."""
    interp.load(source())
    return interp


def interpreter(steps=None, trace=False, stdlib=True):
    """A fresh :class:`Interpreter`, with the library loaded unless ``stdlib`` is false."""
    kwargs = {"trace": trace}
    if steps is not None:
        kwargs["steps"] = steps
    interp = Interpreter(**kwargs)
    if stdlib:
        load(interp)
    return interp
