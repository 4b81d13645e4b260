"""Element algebra: the data values that moments are computed over.

Three kinds are supported: real scalars, complex scalars, and fixed-length
real vectors. Addition and multiplication are componentwise, exponentiation
extends multiplication, and the norm is Euclidean. All moment formulas in
this package are written once against this contract; the payloads themselves
are plain ``float``, ``complex`` and 1-D ``numpy.ndarray`` values so the
native ``+``, ``-``, ``*`` operators implement the componentwise semantics
directly.

Values are immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .errors import BadKindSpec, DomainError, KindMismatch, ValidationError

# Smallest real base accepted under a fractional or negative exponent.
# Below this, log-based powers of real values degenerate; the complex kind
# exists precisely to lift the restriction.
POW_FLOOR = 1e-300

Payload = Union[float, complex, np.ndarray]


class Kind(str, Enum):
    SCALAR = "scalar"
    COMPLEX = "complex"
    VECTOR = "vector"


def parse_kind_spec(spec: str) -> tuple[Kind, int | None]:
    """Parse a kind spec string: ``scalar``, ``complex`` or ``vector:D``."""
    text = spec.strip().lower()
    if text == "scalar":
        return Kind.SCALAR, None
    if text == "complex":
        return Kind.COMPLEX, None
    if text.startswith("vector:"):
        try:
            dim = int(text.split(":", 1)[1])
        except ValueError:
            raise BadKindSpec(f"bad vector dimension in kind spec {spec!r}") from None
        if dim < 1:
            raise BadKindSpec(f"vector dimension must be >= 1, got {dim}")
        return Kind.VECTOR, dim
    raise BadKindSpec(f"unknown kind spec {spec!r} (expected scalar, complex or vector:D)")


def format_kind(kind: Kind, dim: int | None) -> str:
    if kind is Kind.VECTOR:
        return f"vector:{dim}"
    return kind.value


def zero_payload(kind: Kind, dim: int | None = None) -> Payload:
    if kind is Kind.SCALAR:
        return 0.0
    if kind is Kind.COMPLEX:
        return 0j
    return np.zeros(dim, dtype=np.float64)


def one_payload(kind: Kind, dim: int | None = None) -> Payload:
    if kind is Kind.SCALAR:
        return 1.0
    if kind is Kind.COMPLEX:
        return 1 + 0j
    return np.ones(dim, dtype=np.float64)


def pow_payload(kind: Kind, value: Payload, order: float) -> Payload:
    """Raise a payload to a real power, componentwise.

    Non-negative integer orders are evaluated by repeated multiplication,
    which is exact for exact inputs. Fractional and negative orders use the
    principal branch on the complex kind and require every real component to
    exceed POW_FLOOR on the real kinds.
    """
    forder = float(order)
    if forder.is_integer() and forder >= 0:
        k = int(forder)
        if k == 0:
            return one_payload(kind, _payload_dim(kind, value))
        r = value
        for _ in range(k - 1):
            r = r * value
        return r
    if kind is Kind.COMPLEX:
        z = complex(value)
        if z == 0:
            if forder > 0:
                return 0j
            raise DomainError("zero complex base with a non-positive exponent")
        return z ** forder
    if kind is Kind.SCALAR:
        if not value > POW_FLOOR:
            raise DomainError(
                f"real base {value!r} not above {POW_FLOOR} under exponent {forder}"
            )
        return value ** forder
    if not np.all(value > POW_FLOOR):
        raise DomainError(
            f"vector component not above {POW_FLOOR} under exponent {forder}"
        )
    return value ** forder


def norm_payload(kind: Kind, value: Payload) -> float:
    """Euclidean norm: |x| for scalars, modulus for complex, 2-norm for vectors.

    hypot keeps the vector norm scale-safe: squaring tiny or huge components
    directly would under/overflow.
    """
    if kind is Kind.VECTOR:
        return math.hypot(*value)
    return abs(value)


def _payload_dim(kind: Kind, value: Payload) -> int | None:
    return len(value) if kind is Kind.VECTOR else None


def _freeze(kind: Kind, value: Payload) -> Payload:
    if kind is Kind.VECTOR and isinstance(value, np.ndarray):
        value.flags.writeable = False
    return value


@dataclass(frozen=True)
class ElementValue:
    """One immutable data value together with its kind tag."""

    kind: Kind
    value: Payload

    def __post_init__(self) -> None:
        _freeze(self.kind, self.value)

    @property
    def dim(self) -> int | None:
        return _payload_dim(self.kind, self.value)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ElementValue):
            return NotImplemented
        if self.kind is not other.kind:
            return False
        if self.kind is Kind.VECTOR:
            return bool(np.array_equal(self.value, other.value))
        return self.value == other.value

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"ElementValue({self.kind.value}, {self.value!r})"


def scalar(x: float) -> ElementValue:
    return ElementValue(Kind.SCALAR, float(x))


def complex_scalar(z: complex) -> ElementValue:
    return ElementValue(Kind.COMPLEX, complex(z))


def vector(components: Sequence[float]) -> ElementValue:
    arr = np.array(components, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValidationError("vector payload must be a non-empty 1-D sequence")
    return ElementValue(Kind.VECTOR, arr)


def zero(kind: Kind, dim: int | None = None) -> ElementValue:
    return ElementValue(kind, zero_payload(kind, dim))


def one(kind: Kind, dim: int | None = None) -> ElementValue:
    return ElementValue(kind, one_payload(kind, dim))


def _check_same_kind(a: ElementValue, b: ElementValue) -> None:
    if a.kind is not b.kind:
        raise KindMismatch(f"cannot combine {a.kind.value} with {b.kind.value}")
    if a.kind is Kind.VECTOR and a.dim != b.dim:
        raise KindMismatch(f"vector dimensions differ: {a.dim} vs {b.dim}")


def elem_add(a: ElementValue, b: ElementValue) -> ElementValue:
    """Componentwise sum of two values of the same kind."""
    _check_same_kind(a, b)
    return ElementValue(a.kind, a.value + b.value)


def elem_mul(a: ElementValue, b: ElementValue) -> ElementValue:
    """Componentwise (Hadamard) product of two values of the same kind."""
    _check_same_kind(a, b)
    return ElementValue(a.kind, a.value * b.value)


def elem_pow(a: ElementValue, order: float) -> ElementValue:
    """Componentwise real power; see pow_payload for domain rules."""
    return ElementValue(a.kind, pow_payload(a.kind, a.value, order))


def elem_norm(a: ElementValue) -> float:
    return norm_payload(a.kind, a.value)


@dataclass(frozen=True)
class WeightedDatum:
    """One record of a weighted dataset: a value and its real weight."""

    x: ElementValue
    weight: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.weight):
            raise ValidationError(f"weight must be finite, got {self.weight!r}")
