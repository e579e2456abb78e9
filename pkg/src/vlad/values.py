"""Runtime values.

Reals are plain Python floats; everything else is one of the small classes
below. Values are never mutated after construction.
"""

from dataclasses import dataclass
from enum import Enum


class Empty:
    """The empty list ``[]``."""

    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY"

    def __reduce__(self):
        return (Empty, ())


EMPTY = Empty()


class Kind(Enum):
    UNARY = "unary"
    BINARY = "binary"
    UNARY_BOOL = "unary-bool"
    BINARY_BOOL = "binary-bool"
    ZERO = "zero"
    PLUS = "plus"
    J = "rad"
    JINV = "rad-inverse"
    ATTACH = "attach-derivative"
    SENS_J = "%rad-sensitivity"
    SENS_JINV = "%unrad-sensitivity"


@dataclass(frozen=True)
class PrimitiveTag:
    kind: Kind
    name: str

    @property
    def takes_pair(self):
        return self.kind in (
            Kind.BINARY, Kind.BINARY_BOOL, Kind.PLUS, Kind.ATTACH, Kind.SENS_J, Kind.SENS_JINV,
        )


@dataclass(frozen=True, eq=False)
class Primitive:
    tag: PrimitiveTag

    def __eq__(self, other):
        return isinstance(other, Primitive) and other.tag == self.tag

    def __hash__(self):
        return hash(self.tag)

    def __repr__(self):
        return f"Primitive({self.tag.name})"


@dataclass(frozen=True)
class Tagged:
    """A reverse-tagged value."""

    inner: object


@dataclass(frozen=True, eq=False)
class Closure:
    env: dict
    lam: object

    def __eq__(self, other):
        if not isinstance(other, Closure):
            return NotImplemented
        if self is other:
            return True
        return (self.lam is other.lam or self.lam == other.lam) and self.env == other.env

    __hash__ = object.__hash__

    def __repr__(self):
        return f"Closure(λ{self.lam.param}, {sorted(self.env)})"


@dataclass(frozen=True)
class Custom:
    """A primal value carrying a programmer-supplied derivative."""

    primal: object
    derivative: object


def is_real(v):
    return type(v) is float


def describe(v):
    """Short shape name used in error messages."""
    if type(v) is float:
        return "real"
    if v is EMPTY:
        return "()"
    if isinstance(v, Tagged):
        return f"(reverse {describe(v.inner)})"
    if isinstance(v, Primitive):
        return f"primitive {v.tag.name}"
    if isinstance(v, Closure):
        return f"closure λ{v.lam.param}"
    if isinstance(v, Custom):
        return f"custom {describe(v.primal)}"
    return type(v).__name__
