"""Exact decimal fixed-point numbers.

A :class:`ScaledValue` stores an integer count of ``10**-q`` units.  All model
parameters (weights, thresholds) and influence sums live on this grid, so
comparisons and the digit manipulations used by the compiled network are exact.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

_DECIMAL_RE = re.compile(r"^\s*([+-]?)(\d*)(?:\.(\d*))?\s*$")


class MoreThanQDigits(ValueError):
    """The literal needs more fractional digits than the precision allows."""


class NegativeValue(ValueError):
    """A negative literal was given where only non-negative values are valid."""


def parse_units(text: str, q: int, allow_negative: bool = True) -> int:
    """Parse a decimal literal into an integer count of ``10**-q`` units."""
    m = _DECIMAL_RE.match(text)
    if m is None or (m.group(2) == "" and not m.group(3)):
        raise ValueError(f"not a decimal literal: {text!r}")
    sign, whole, frac = m.group(1), m.group(2) or "0", m.group(3) or ""
    stripped = frac.rstrip("0")
    if len(stripped) > q:
        raise MoreThanQDigits(f"{text!r} has more than {q} fractional digits")
    units = int(whole) * 10**q + (int(stripped.ljust(q, "0")) if q else 0)
    if sign == "-":
        units = -units
    if units < 0 and not allow_negative:
        raise NegativeValue(f"{text!r} is negative")
    return units


def format_units(units: int, q: int) -> str:
    """Render ``units * 10**-q`` with exactly ``q`` fractional digits."""
    sign = "-" if units < 0 else ""
    a = abs(units)
    if q == 0:
        return f"{sign}{a}"
    whole, frac = divmod(a, 10**q)
    return f"{sign}{whole}.{frac:0{q}d}"


@dataclass(frozen=True, order=False)
class ScaledValue:
    units: int
    q: int

    @classmethod
    def from_decimal_string(cls, text: str, q: int, allow_negative: bool = False) -> "ScaledValue":
        return cls(parse_units(text, q, allow_negative), q)

    @classmethod
    def from_fraction(cls, value: Fraction, q: int) -> "ScaledValue":
        scaled = Fraction(value) * 10**q
        if scaled.denominator != 1:
            raise MoreThanQDigits(f"{value} is not on the 10^-{q} grid")
        return cls(int(scaled), q)

    def __str__(self) -> str:
        return format_units(self.units, self.q)

    def to_fraction(self) -> Fraction:
        return Fraction(self.units, 10**self.q)

    def rescale(self, q: int) -> "ScaledValue":
        """Move to precision ``q``; refuses to drop nonzero digits."""
        if q >= self.q:
            return ScaledValue(self.units * 10 ** (q - self.q), q)
        div, rem = divmod(self.units, 10 ** (self.q - q))
        if rem:
            raise MoreThanQDigits(f"{self} does not fit in {q} digits")
        return ScaledValue(div, q)

    def _align(self, other: "ScaledValue | int") -> tuple[int, int, int]:
        if isinstance(other, int):
            other = ScaledValue(other * 10**self.q, self.q)
        q = max(self.q, other.q)
        return self.units * 10 ** (q - self.q), other.units * 10 ** (q - other.q), q

    def __add__(self, other: "ScaledValue | int") -> "ScaledValue":
        a, b, q = self._align(other)
        return ScaledValue(a + b, q)

    __radd__ = __add__

    def __sub__(self, other: "ScaledValue | int") -> "ScaledValue":
        a, b, q = self._align(other)
        return ScaledValue(a - b, q)

    def __rsub__(self, other: int) -> "ScaledValue":
        a, b, q = self._align(other)
        return ScaledValue(b - a, q)

    def __neg__(self) -> "ScaledValue":
        return ScaledValue(-self.units, self.q)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, (ScaledValue, int)):
            return NotImplemented
        a, b, _ = self._align(other)
        return a == b

    def __hash__(self) -> int:
        return hash(self.to_fraction())

    def __lt__(self, other: "ScaledValue | int") -> bool:
        a, b, _ = self._align(other)
        return a < b

    def __le__(self, other: "ScaledValue | int") -> bool:
        a, b, _ = self._align(other)
        return a <= b

    def __gt__(self, other: "ScaledValue | int") -> bool:
        a, b, _ = self._align(other)
        return a > b

    def __ge__(self, other: "ScaledValue | int") -> bool:
        a, b, _ = self._align(other)
        return a >= b

    def shift(self, k: int) -> "ScaledValue":
        """Multiply by ``10**k``; negative ``k`` must be exact."""
        if k >= 0:
            return ScaledValue(self.units * 10**k, self.q)
        div, rem = divmod(self.units, 10**-k)
        if rem:
            raise MoreThanQDigits(f"{self} * 10^{k} is not on the grid")
        return ScaledValue(div, self.q)

    def mod_pow10(self, k: int) -> "ScaledValue":
        """Remainder modulo ``10**k`` (floored, like Python's ``%``)."""
        return ScaledValue(self.units % (10 ** (k + self.q)) if k + self.q >= 0 else 0, self.q)

    def is_zero(self) -> bool:
        return self.units == 0


def scaled_from_decimal_string(text: str, q: int, allow_negative: bool = False) -> ScaledValue:
    return ScaledValue.from_decimal_string(text, q, allow_negative)


ZERO = ScaledValue(0, 0)
