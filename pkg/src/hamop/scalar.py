"""Numeric scalars: exact rationals, exact Gaussian rationals, floating complex.

Exact rationals are ``gmpy2.mpq`` (always reduced, positive denominator).
Exact complex values are :class:`GaussQ`.  Anything floating is a Python
``complex``; once a floating operand enters, results stay floating.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Number

from gmpy2 import mpq, mpz

__all__ = ["mpq", "GaussQ", "to_scalar", "is_exact", "to_complex", "scalar_str"]

_MPQ = type(mpq(0))


class GaussQ:
    """Exact complex number ``re + im*I`` with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re, im=0):
        self.re = mpq(re)
        self.im = mpq(im)

    @staticmethod
    def make(re, im):
        return mpq(re) if im == 0 else GaussQ(re, im)

    def _coerce(self, other):
        if isinstance(other, GaussQ):
            return other
        if isinstance(other, (int, _MPQ, Fraction)):
            return GaussQ(other, 0)
        return None

    def __add__(self, other):
        if isinstance(other, (complex, float)):
            return complex(self) + other
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return GaussQ.make(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussQ(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (complex, float)):
            return complex(self) * other
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return GaussQ.make(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def conjugate(self):
        return GaussQ(self.re, -self.im)

    def norm(self):
        return self.re * self.re + self.im * self.im

    def __truediv__(self, other):
        if isinstance(other, (complex, float)):
            return complex(self) / other
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        n = o.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero")
        p = self * o.conjugate()
        if isinstance(p, GaussQ):
            return GaussQ.make(p.re / n, p.im / n)
        return p / n

    def __rtruediv__(self, other):
        if isinstance(other, (complex, float)):
            return other / complex(self)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __pow__(self, k):
        if not isinstance(k, int):
            return complex(self) ** k
        if k < 0:
            return 1 / (self ** (-k))
        result = mpq(1)
        base = self
        while k:
            if k & 1:
                result = base * result
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, GaussQ):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, _MPQ, Fraction)):
            return self.im == 0 and self.re == other
        if isinstance(other, complex):
            return complex(self) == other
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __abs__(self):
        return abs(complex(self))

    def __repr__(self):
        return f"GaussQ({self.re}, {self.im})"


def to_scalar(value):
    """Coerce a Python number into the scalar tower."""
    if isinstance(value, (_MPQ, GaussQ)):
        return value
    if isinstance(value, bool):
        return mpq(int(value))
    if isinstance(value, (int, type(mpz(0)))):
        return mpq(value)
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, float):
        return complex(value)
    if isinstance(value, complex):
        return value
    if isinstance(value, Number):
        return complex(value)
    raise TypeError(f"not a scalar: {value!r}")


def is_exact(value) -> bool:
    return isinstance(value, (_MPQ, GaussQ, int, Fraction))


def to_complex(value) -> complex:
    return complex(value)


def scalar_str(value) -> str:
    """Render a scalar in the expression grammar (round-trips for exact values)."""
    if isinstance(value, _MPQ):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, GaussQ):
        re, im = scalar_str(value.re), scalar_str(value.im)
        return f"({re} + ({im})*I)"
    if isinstance(value, complex):
        if value.imag == 0:
            return repr(value.real)
        return f"({value.real!r} + ({value.imag!r})*I)"
    return str(value)
