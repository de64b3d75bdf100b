import math
import random
from fractions import Fraction

import gmpy2
import pytest
from hypothesis import given, strategies as st

from opquad.scalars import as_rational, bf_sqrt, rat_arith, rat_to_bigfloat, ulp, working_precision
from oracles import power_rule_moment

rationals = st.fractions(max_denominator=10**6).filter(lambda q: abs(q) < 10**9)


def canonical(q: Fraction) -> bool:
    return q.denominator > 0 and math.gcd(abs(q.numerator), q.denominator) == 1


def test_rat_add_example():
    assert rat_arith(Fraction(1, 3), Fraction(1, 6), "add") == Fraction(1, 2)


def test_canonical_form():
    q = as_rational("2/4")
    assert (q.numerator, q.denominator) == (1, 2)


def test_moment_of_x_seven_thirds():
    got = rat_arith(1, rat_arith(Fraction(7, 3), 1, "add"), "div")
    assert got == power_rule_moment(Fraction(7, 3)) == Fraction(3, 10)


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        rat_arith(Fraction(1, 2), 0, "div")


def test_unknown_op():
    with pytest.raises(ValueError):
        rat_arith(1, 2, "pow")


@given(rationals, rationals, st.sampled_from(["add", "sub", "mul", "div"]))
def test_results_canonical(a, b, op):
    if op == "div" and b == 0:
        return
    assert canonical(rat_arith(a, b, op))


@given(rationals, rationals, rationals)
def test_exact_associativity_distributivity(a, b, c):
    assert rat_arith(rat_arith(a, b, "add"), c, "add") == rat_arith(a, rat_arith(b, c, "add"), "add")
    lhs = rat_arith(a, rat_arith(b, c, "add"), "mul")
    rhs = rat_arith(rat_arith(a, b, "mul"), rat_arith(a, c, "mul"), "add")
    assert lhs == rhs


@given(rationals, rationals, st.sampled_from([53, 113, 512]))
def test_conversion_monotone(a, b, prec):
    a, b = min(a, b), max(a, b)
    assert rat_to_bigfloat(a, prec) <= rat_to_bigfloat(b, prec)


def test_conversion_examples():
    assert rat_to_bigfloat(Fraction(1, 2), 53) == 0.5
    third = rat_to_bigfloat(Fraction(1, 3), 53)
    assert float(third) == 1 / 3
    err = abs(gmpy2.mpq(third) - gmpy2.mpq(1, 3)) / gmpy2.mpq(1, 3)
    assert err <= gmpy2.mpq(1, 2**53)
    x = rat_to_bigfloat(Fraction(3, 10), 512)
    assert x.precision == 512
    err = abs(gmpy2.mpq(x) - gmpy2.mpq(3, 10)) / gmpy2.mpq(3, 10)
    assert err <= gmpy2.mpq(1, 2**512)


def test_precision_floor():
    with pytest.raises(ValueError):
        rat_to_bigfloat(Fraction(1, 3), 52)


def test_sqrt_examples():
    assert bf_sqrt(rat_to_bigfloat(4)) == 2
    assert bf_sqrt(rat_to_bigfloat(0)) == 0
    r = bf_sqrt(rat_to_bigfloat(2))
    with working_precision(512):
        assert abs(r * r - 2) <= ulp(gmpy2.mpfr(2))


def test_sqrt_negative():
    with pytest.raises(ValueError):
        bf_sqrt(rat_to_bigfloat(-1))


def test_sqrt_square_within_two_ulp():
    rng = random.Random(1234)
    for _ in range(10_000):
        q = Fraction(rng.randint(1, 10**12), rng.randint(1, 10**12))
        x = rat_to_bigfloat(q, 512)
        r = bf_sqrt(x)
        with working_precision(1100):  # exact square of a 512-bit number
            sq = r * r
            assert abs(sq - x) <= 2 * ulp(x)


def test_ulp_is_power_of_two():
    with working_precision(53):
        assert ulp(gmpy2.mpfr(1)) == 2.0**-52
        assert ulp(gmpy2.mpfr(6.79)) == 2.0**-50
    assert ulp(rat_to_bigfloat(3, 512)) == gmpy2.mpfr(2) ** (2 - 512)
