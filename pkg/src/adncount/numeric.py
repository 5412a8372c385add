"""Scalar arithmetic for potentials.

Two backends share one set of operations:

* ``exact``   -- :class:`ExactScalar`, a nonnegative integer over a power of the
  epoch's mixing divisor ``d`` (``numerator / base**exponent``).  The potential
  update only ever divides by ``d``, so every potential of an epoch fits this
  form without rounding.
* ``float64`` -- plain Python floats; comparisons use an absolute tolerance.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import gmpy2
import mpmath

DEFAULT_TOLERANCE = 1e-9


class NumericError(ValueError):
    pass


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


@dataclass(frozen=True)
class Backend:
    tag: str = "exact"
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        if self.tag not in ("exact", "float64"):
            raise NumericError(f"unknown backend {self.tag!r}")
        if not self.tolerance >= 0:
            raise NumericError("tolerance must be nonnegative")

    @property
    def exact(self) -> bool:
        return self.tag == "exact"

    def zero(self, base: int, exponent: int = 0) -> "Scalar":
        return ExactScalar(0, exponent, base) if self.exact else 0.0

    def one(self, base: int, exponent: int = 0) -> "Scalar":
        if self.exact:
            return ExactScalar(gmpy2.mpz(base) ** exponent, exponent, base)
        return 1.0

    def compare(self, a, b) -> Ordering:
        return compare(a, b, self.tolerance if not self.exact else 0.0)


@dataclass(frozen=True, eq=False)
class ExactScalar:
    """``numerator / base**exponent`` with no normalization."""

    numerator: int
    exponent: int
    base: int

    def __post_init__(self):
        if self.numerator < 0:
            raise NumericError("exact scalars are nonnegative")
        if self.exponent < 0 or self.base < 2:
            raise NumericError(f"bad denominator {self.base}^{self.exponent}")

    @property
    def denominator(self) -> int:
        return gmpy2.mpz(self.base) ** self.exponent

    def to_fraction(self) -> Fraction:
        return Fraction(int(self.numerator), int(self.denominator))

    def rebase(self, exponent: int) -> "ExactScalar":
        if exponent < self.exponent:
            raise NumericError("cannot rebase to a smaller exponent")
        if exponent == self.exponent:
            return self
        scale = gmpy2.mpz(self.base) ** (exponent - self.exponent)
        return ExactScalar(self.numerator * scale, exponent, self.base)

    def __float__(self) -> float:
        return ratio_to_float(self.numerator, self.denominator)

    def __eq__(self, other):
        if isinstance(other, (ExactScalar, Fraction, int)):
            return compare(self, other) == Ordering.EQUAL
        return NotImplemented

    def __lt__(self, other):
        return compare(self, other) == Ordering.LESS

    def __le__(self, other):
        return compare(self, other) != Ordering.GREATER

    def __gt__(self, other):
        return compare(self, other) == Ordering.GREATER

    def __ge__(self, other):
        return compare(self, other) != Ordering.LESS

    def __hash__(self):
        return hash(self.to_fraction())

    def __add__(self, other):
        return add(self, other)

    def __repr__(self):
        if self.numerator.bit_length() <= 64:
            return f"ExactScalar({self.ratio_string()})"
        return f"ExactScalar(~{self.decimal_string(12)}, {self.base}^{self.exponent})"

    def ratio_string(self) -> str:
        return f"{digits(self.numerator)}/{self.base}^{self.exponent}"

    def decimal_string(self, significant: int = 30) -> str:
        with mpmath.workdps(significant + 10):
            value = mpmath.mpf(int(self.numerator)) / mpmath.mpf(self.base) ** self.exponent
            return mpmath.nstr(value, significant, strip_zeros=False)


Scalar = Union[ExactScalar, float]


def digits(value: int) -> str:
    # gmpy2 has no max-str-digits limit and converts large integers quickly
    return gmpy2.mpz(value).digits(10)


def ratio_to_float(num, den) -> float:
    """Nearest-ish float of ``num/den`` without reducing the fraction first."""
    with gmpy2.context(precision=80):
        return float(gmpy2.mpfr(gmpy2.mpz(num)) / gmpy2.mpfr(gmpy2.mpz(den)))


def _check_pair(a, b) -> None:
    if isinstance(a, ExactScalar) != isinstance(b, ExactScalar):
        raise NumericError("operands come from different backends")
    if isinstance(a, ExactScalar) and a.base != b.base:
        raise NumericError(f"base mismatch: {a.base} vs {b.base}")


def add(a: Scalar, b: Scalar) -> Scalar:
    """Sum of two scalars; exact operands are rebased to the larger exponent."""
    _check_pair(a, b)
    if not isinstance(a, ExactScalar):
        return a + b
    e = max(a.exponent, b.exponent)
    a, b = a.rebase(e), b.rebase(e)
    return ExactScalar(a.numerator + b.numerator, e, a.base)


def scale(a: Scalar, factor: int) -> Scalar:
    """Multiply by a nonnegative integer."""
    if factor < 0:
        raise NumericError("negative scale factor")
    if isinstance(a, ExactScalar):
        return ExactScalar(a.numerator * factor, a.exponent, a.base)
    return a * factor


def div_base(a: Scalar, d: int) -> Scalar:
    if d < 2:
        raise NumericError(f"divisor must be at least 2, got {d}")
    if isinstance(a, ExactScalar):
        if d != a.base:
            raise NumericError(f"exact scalar with base {a.base} cannot be divided by {d}")
        return ExactScalar(a.numerator, a.exponent + 1, a.base)
    return a / d


def _as_ratio(x) -> tuple[int, int]:
    if isinstance(x, ExactScalar):
        return x.numerator, x.denominator
    if isinstance(x, Fraction):
        return x.numerator, x.denominator
    if isinstance(x, int):
        return x, 1
    raise NumericError(f"not an exact operand: {x!r}")


def compare(a, b, tol: float = DEFAULT_TOLERANCE) -> Ordering:
    """Three-way comparison.

    Exact operands (``ExactScalar``, ``Fraction``, ``int``) compare by
    cross-multiplication.  Floats compare with absolute tolerance ``tol``:
    ``|a - b| <= tol`` is ``EQUAL``.
    """
    if isinstance(a, float) or isinstance(b, float):
        if isinstance(a, ExactScalar) or isinstance(b, ExactScalar):
            raise NumericError("operands come from different backends")
        a, b = float(a), float(b)
        if abs(a - b) <= tol:
            return Ordering.EQUAL
        return Ordering.LESS if a < b else Ordering.GREATER
    if isinstance(a, ExactScalar) and isinstance(b, ExactScalar) and a.base == b.base:
        e = max(a.exponent, b.exponent)
        lhs, rhs = a.rebase(e).numerator, b.rebase(e).numerator
    else:
        an, ad = _as_ratio(a)
        bn, bd = _as_ratio(b)
        lhs, rhs = an * bd, bn * ad
    if lhs == rhs:
        return Ordering.EQUAL
    return Ordering.LESS if lhs < rhs else Ordering.GREATER


def to_fraction(x) -> Fraction:
    if isinstance(x, ExactScalar):
        return x.to_fraction()
    return Fraction(x)


def render(x: Scalar) -> str:
    """Decimal rendering: 30 significant digits for exact, 17 for floats."""
    if isinstance(x, ExactScalar):
        return x.decimal_string(30)
    return format(float(x), ".17g")
