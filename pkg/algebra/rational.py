"""
Exact complex rationals.
"""

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Any, Dict, Union

from shared.errors import SchemaError

Scalar = Union[int, Fraction, "CRational"]


def fraction_to_str(value: Fraction) -> str:
    """Serialize a rational as "p/q"."""
    return f"{value.numerator}/{value.denominator}"


def parse_fraction(value: Any) -> Fraction:
    """Parse "p/q", an integer or a decimal string into a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise SchemaError(f"Not a rational: {value!r}")
    if isinstance(value, (int, str)):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as e:
            raise SchemaError(f"Not a rational: {value!r}") from e
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    raise SchemaError(f"Not a rational: {value!r}")


@dataclass(frozen=True)
class CRational:
    """Complex number with arbitrary-precision rational parts."""
    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @classmethod
    def of(cls, value: Any) -> "CRational":
        if isinstance(value, CRational):
            return value
        if isinstance(value, (int, Rational)) and not isinstance(value, bool):
            return cls(Fraction(value), Fraction(0))
        if isinstance(value, complex):
            return cls(parse_fraction(value.real), parse_fraction(value.imag))
        if isinstance(value, float):
            return cls(parse_fraction(value), Fraction(0))
        raise TypeError(f"Cannot convert {type(value).__name__} to CRational")

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "CRational":
        return cls(parse_fraction(data.get("re", 0)), parse_fraction(data.get("im", 0)))

    def to_json(self) -> Dict[str, str]:
        return {"re": fraction_to_str(self.re), "im": fraction_to_str(self.im)}

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def conjugate(self) -> "CRational":
        return CRational(self.re, -self.im)

    def __bool__(self) -> bool:
        return not self.is_zero()

    def __neg__(self) -> "CRational":
        return CRational(-self.re, -self.im)

    def __add__(self, other: Any) -> "CRational":
        o = CRational.of(other)
        return CRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other: Any) -> "CRational":
        o = CRational.of(other)
        return CRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other: Any) -> "CRational":
        return CRational.of(other) - self

    def __mul__(self, other: Any) -> "CRational":
        o = CRational.of(other)
        return CRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "CRational":
        o = CRational.of(other)
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("CRational division by zero")
        num = self * o.conjugate()
        return CRational(num.re / den, num.im / den)

    def __pow__(self, k: int) -> "CRational":
        if k < 0:
            return CRational(Fraction(1)) / (self ** (-k))
        result = CRational(Fraction(1))
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other: Any) -> bool:
        try:
            o = CRational.of(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self) -> int:
        return hash((self.re, self.im))

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __str__(self) -> str:
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}*I"
        return f"({self.re} + {self.im}*I)"

    __repr__ = __str__


ZERO = CRational(Fraction(0))
ONE = CRational(Fraction(1))
I = CRational(Fraction(0), Fraction(1))

# (-i)^k cycles with period 4
MINUS_I_POWERS = (ONE, -I, -ONE, I)


def minus_i_power(k: int) -> CRational:
    return MINUS_I_POWERS[k % 4]


def i_power(k: int) -> CRational:
    return (ONE, I, -ONE, -I)[k % 4]
