"""Exact rationals and fixed-precision binary floats.

Rationals are :class:`fractions.Fraction` (always kept in lowest terms).
Big floats are :class:`gmpy2.mpfr` values; arithmetic on them is rounded to
the precision of the active gmpy2 context, so every routine that does big
float arithmetic wraps its work in :func:`working_precision`.
"""
from __future__ import annotations

import operator
from fractions import Fraction

import gmpy2

Rational = Fraction
BigFloat = gmpy2.mpfr

DEFAULT_PRECISION = 512
MIN_PRECISION = 53

_RAT_OPS = {
    "add": operator.add,
    "sub": operator.sub,
    "mul": operator.mul,
    "div": operator.truediv,
}


def check_precision(precision: int) -> int:
    precision = int(precision)
    if precision < MIN_PRECISION:
        raise ValueError(f"precision must be >= {MIN_PRECISION} bits, got {precision}")
    return precision


def working_precision(precision: int):
    """Context manager setting the (thread-local) gmpy2 precision.

    Rounding mode is round-to-nearest, ties to even.
    """
    return gmpy2.context(precision=check_precision(precision), round=gmpy2.RoundToNearest)


def as_rational(x) -> Fraction:
    """Convert ints, strings like ``"1/3"`` and floats (exactly) to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a rational number")
    return Fraction(x)


def rat_arith(a, b, op: str) -> Fraction:
    """Exact ``a op b`` for op in add/sub/mul/div.

    Raises ZeroDivisionError for division by zero.
    """
    try:
        fn = _RAT_OPS[op]
    except KeyError:
        raise ValueError(f"unknown rational operation {op!r}") from None
    a, b = as_rational(a), as_rational(b)
    if op == "div" and b == 0:
        raise ZeroDivisionError(f"rational division {a} / 0")
    return fn(a, b)


def rat_to_bigfloat(a, precision: int = DEFAULT_PRECISION) -> gmpy2.mpfr:
    """Correctly rounded conversion of a rational to ``precision`` bits."""
    a = as_rational(a)
    with working_precision(precision):
        return gmpy2.mpfr(gmpy2.mpq(a.numerator, a.denominator))


def bf_sqrt(a, precision: int | None = None) -> gmpy2.mpfr:
    """Correctly rounded square root. Negative input raises ValueError."""
    if precision is None:
        precision = a.precision if isinstance(a, gmpy2.mpfr) else DEFAULT_PRECISION
    with working_precision(precision):
        a = gmpy2.mpfr(a)
        if gmpy2.is_nan(a) or a < 0:
            raise ValueError(f"square root of negative number {float(a)!r}")
        return gmpy2.sqrt(a)


def ulp(a: gmpy2.mpfr) -> gmpy2.mpfr:
    """Unit in the last place of ``a`` at its own precision."""
    if a == 0:
        raise ValueError("ulp of zero is not defined here")
    with working_precision(a.precision):
        exp, _ = gmpy2.frexp(a)  # gmpy2 order: (exponent, mantissa)
        return gmpy2.mpfr(2) ** (exp - a.precision)
