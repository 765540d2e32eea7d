import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from badapprox.arith import (
    PHI,
    SQRT2,
    QuadraticSurd,
    cf_expand,
    convergents_of,
    dist_to_nearest_int_vector,
    exact,
    nearest_int,
    sup_norm,
    to_mpf,
)
from badapprox.errors import PrecisionExhausted

fracs = st.fractions(min_value=-50, max_value=50, max_denominator=10**6)
surds = st.builds(
    QuadraticSurd,
    st.fractions(min_value=-20, max_value=20, max_denominator=50),
    st.fractions(min_value=-20, max_value=20, max_denominator=50).filter(lambda b: b != 0),
    st.sampled_from([2, 3, 5, 6, 7, 10, 13]),
)


def _mp(x, prec=400):
    with mpmath.workprec(prec):
        return to_mpf(x, prec)


def test_golden_ratio_expansion():
    cf = cf_expand(PHI, 6)
    assert (cf.a0, cf.partial_quotients) == (1, (1, 1, 1, 1, 1))
    assert cf.tail is not None and cf.tail.block == (1,)


def test_half_terminates():
    cf = cf_expand(Fraction(1, 2), 4)
    assert (cf.a0, cf.partial_quotients, cf.terminated) == (0, (2,), True)


def test_sqrt2_period():
    cf = cf_expand(SQRT2, 10)
    assert cf.a0 == 1 and set(cf.partial_quotients) == {2}
    assert cf.quotient(100) == 2


def test_float_and_mpf_agree_with_exact_surd():
    exact_cf = cf_expand(PHI, 30).partial_quotients
    assert cf_expand(float(PHI), 20).partial_quotients == exact_cf[:19]
    with mpmath.workprec(200):
        x = (1 + mpmath.sqrt(5)) / 2
    assert cf_expand(x, 30, precision_bits=200).partial_quotients == exact_cf


def test_precision_exhausted_is_raised():
    with pytest.raises(PrecisionExhausted):
        cf_expand(float(PHI), 60)
    x = mpmath.mpf(float(SQRT2))  # 53-bit value, claimed 53 bits
    with pytest.raises(PrecisionExhausted):
        cf_expand(x, 60, precision_bits=53)


def test_nearest_int_ties_round_down():
    assert nearest_int(Fraction(5, 2)) == 2
    assert nearest_int(Fraction(-1, 2)) == -1
    assert nearest_int(Fraction(7, 3)) == 2
    assert nearest_int(2.6) == 3


def test_dist_to_nearest_int_vector_phi():
    dist, p = dist_to_nearest_int_vector([PHI])
    assert p == (2,)
    assert dist == 2 - PHI
    assert abs(float(dist) - 0.3819660112501051) < 1e-15
    assert dist_to_nearest_int_vector([Fraction(1, 2), Fraction(3, 4)]) == (Fraction(1, 2), (0, 1))


def test_sup_norm():
    assert sup_norm([Fraction(-3, 2), 1]) == Fraction(3, 2)
    with pytest.raises(ValueError):
        sup_norm([])


@given(fracs)
def test_rational_expansion_is_exact(x):
    cf = cf_expand(x, 200)
    assert cf.terminated
    assert cf.value() == x


@given(fracs, st.integers(2, 40))
def test_convergents_approximate(x, depth):
    cf = cf_expand(x, depth)
    for p, q in cf.convergents():
        assert abs(x - Fraction(p, q)) <= Fraction(1, q * q)
    cv = cf.convergents()
    for (p0, q0), (p1, q1) in zip(cv, cv[1:]):
        assert abs(p1 * q0 - p0 * q1) == 1


@given(surds, st.fractions(-20, 20, max_denominator=50), st.fractions(-20, 20, max_denominator=50).filter(lambda b: b != 0))
def test_surd_field_operations(x, a, b):
    y = QuadraticSurd(a, b, x.d)
    mx, my = _mp(x), _mp(y)
    with mpmath.workprec(400):
        for got, want in ((x + y, mx + my), (x - y, mx - my), (x * y, mx * my)):
            assert abs(_mp(got) - want) <= mpmath.mpf(2) ** -300 * (1 + abs(want))
        q = x / y
        assert abs(_mp(q) - mx / my) <= mpmath.mpf(2) ** -300 * (1 + abs(mx / my))


@given(surds)
def test_surd_floor_and_sign(x):
    with mpmath.workprec(400):
        v = _mp(x)
        assert math.floor(x) == int(mpmath.floor(v))
        assert (x > 0) == (v > 0)
        assert abs(float(x) - float(v)) <= 1e-15 * max(1.0, abs(float(v)))


@given(surds, st.integers(5, 25))
def test_surd_expansion_matches_high_precision(x, depth):
    cf = cf_expand(x, depth)
    with mpmath.workprec(1000):
        v = _mp(x, 1000)
        assert cf_expand(v, depth, precision_bits=900).partial_quotients == cf.partial_quotients


def test_exact_conversions():
    assert exact(0.5) == Fraction(1, 2)
    assert exact(3) == Fraction(3)
    assert isinstance(exact(PHI), QuadraticSurd)
    with pytest.raises(ValueError):
        exact(float("inf"))
    assert convergents_of([1, 1, 1], 1) == [(1, 1), (2, 1), (3, 2), (5, 3)]


def test_surd_string():
    assert str(PHI) == "1/2 + 1/2*sqrt(5)"
    assert str(2 - 4 * SQRT2 + 4) == "6 - 4*sqrt(2)"
    assert str(-SQRT2) == "-sqrt(2)"
