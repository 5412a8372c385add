from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from adncount import numeric
from adncount.numeric import Backend, ExactScalar, NumericError, Ordering


def ex(num, e, base=4):
    return ExactScalar(num, e, base)


def test_add_common_denominator():
    assert numeric.add(ex(1, 2), ex(3, 2)) == Fraction(1, 4)


def test_add_rebases_to_larger_exponent():
    total = numeric.add(ex(1, 1), ex(1, 2))
    assert total.exponent == 2
    assert total.numerator == 5
    assert total == Fraction(5, 16)


def test_add_zero_is_identity():
    x = ex(7, 3)
    assert numeric.add(ex(0, 0), x) == x
    assert numeric.add(0.0, 0.3) == 0.3


def test_add_rejects_mixed_bases_and_backends():
    with pytest.raises(NumericError):
        numeric.add(ex(1, 1, 4), ex(1, 1, 6))
    with pytest.raises(NumericError):
        numeric.add(ex(1, 1), 0.5)


def test_div_base_increments_exponent():
    q = numeric.div_base(ex(3, 0), 4)
    assert (q.numerator, q.exponent) == (3, 1)
    assert q == Fraction(3, 4)
    assert numeric.div_base(ex(1, 1), 4) == Fraction(1, 16)
    assert numeric.div_base(ex(0, 5), 4) == 0


def test_div_base_requires_matching_divisor():
    with pytest.raises(NumericError):
        numeric.div_base(ex(3, 0, 4), 6)
    assert numeric.div_base(3.0, 4) == 0.75


def test_compare_exact():
    assert numeric.compare(Fraction(3, 4), ex(3, 1)) is Ordering.EQUAL
    assert numeric.compare(Fraction(1, 2), Fraction(3, 4)) is Ordering.LESS
    assert numeric.compare(ex(13, 2), ex(3, 1)) is Ordering.GREATER


def test_compare_float_tolerance():
    assert Backend("float64").compare(0.75, 0.75 + 1e-12) is Ordering.EQUAL
    assert Backend("float64").compare(0.75, 0.75 + 1e-6) is Ordering.LESS
    assert numeric.compare(0.75, 0.75 + 1e-12, tol=0.0) is Ordering.LESS


def test_exact_scalar_rejects_negative():
    with pytest.raises(NumericError):
        ExactScalar(-1, 0, 4)


def test_rendering():
    x = ex(1, 1)
    assert x.ratio_string() == "1/4^1"
    assert x.decimal_string(30) == "0.250000000000000000000000000000"
    assert numeric.render(1 / 3) == "0.33333333333333331"


def test_huge_numerators_render_without_int_limits():
    x = ExactScalar(4 ** 6000 // 3, 6000, 4)
    assert numeric.render(x) == "0.333333333333333333333333333333"
    assert len(x.ratio_string()) > 3600
    assert float(x) == pytest.approx(1 / 3, rel=1e-15)


def test_backend_constants():
    be = Backend()
    assert be.one(4, 3) == 1 and be.one(4, 3).exponent == 3
    assert be.zero(4) == 0
    assert Backend("float64").one(4) == 1.0
    with pytest.raises(NumericError):
        Backend("float32")


scalars = st.builds(lambda n, e: ExactScalar(n, e, 6), st.integers(0, 10**6), st.integers(0, 12))


@given(scalars, scalars, scalars)
def test_add_is_associative_and_commutative(a, b, c):
    assert numeric.add(a, b) == numeric.add(b, a)
    assert numeric.add(numeric.add(a, b), c) == numeric.add(a, numeric.add(b, c))
    assert numeric.add(a, b).to_fraction() == a.to_fraction() + b.to_fraction()


@given(scalars, scalars)
def test_compare_matches_rational_order(a, b):
    fa, fb = a.to_fraction(), b.to_fraction()
    expected = Ordering.LESS if fa < fb else Ordering.GREATER if fa > fb else Ordering.EQUAL
    assert numeric.compare(a, b) is expected
    assert numeric.compare(b, a) is Ordering(-expected)


@given(scalars, st.integers(0, 10))
def test_rebase_preserves_value(a, extra):
    assert a.rebase(a.exponent + extra) == a
    assert hash(a.rebase(a.exponent + extra)) == hash(a)
