"""
Tests for exact polynomials and the t-decomposition.
"""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algebra.polyops import MultiPoly, decompose_t, parse_poly, reassemble
from algebra.rational import CRational, I, minus_i_power
from shared.errors import ConstantPoly, DimensionMismatch, NonConstantLeading, SchemaError

small_int = st.integers(min_value=-4, max_value=4)


@st.composite
def x_polys(draw, d=1, max_degree=3):
    """Random t-free polynomials with small integer coefficients."""
    exps = st.tuples(*([st.integers(0, max_degree)] * d)).map(lambda e: e + (0,))
    coeffs = draw(st.dictionaries(exps, small_int, max_size=4))
    return MultiPoly.from_dict(d, coeffs)


@st.composite
def profiles_polys(draw, d=1):
    """P = t^m + sum_{k<m} Q_k(x) t^k with random Q_k."""
    m = draw(st.integers(1, 3))
    P = MultiPoly.variable(d, d) ** m
    for k in range(m):
        P = P + draw(x_polys(d)).shift_t(k)
    return P


def test_rational_arithmetic():
    z = CRational(Fraction(1, 2), Fraction(-3, 4))
    assert z * z.conjugate() == CRational(Fraction(13, 16))
    assert (z / z) == 1
    assert I ** 2 == -1
    assert [minus_i_power(k) for k in range(4)] == [1, -I, -1, I]
    with pytest.raises(ZeroDivisionError):
        z / 0


def test_parse_expression_and_dimension():
    P = parse_poly("t**2 + x1**2 + x2**4")
    assert P.d == 2
    assert P.t_degree() == 2
    assert P.degree_in(1) == 4
    assert P.degree() == 4

    heat = parse_poly("t - I*x**2")
    assert heat.d == 1
    assert heat.as_dict()[(2, 0)] == -I
    assert heat.as_dict()[(0, 1)] == 1


def test_parse_json_and_inline_json_agree():
    P = parse_poly("3/2*x**3*t - 5")
    assert parse_poly(P.to_json()) == P
    assert parse_poly('{"d": 1, "terms": [{"exp": [3, 1], "re": "3/2", "im": "0"}, '
                      '{"exp": [0, 0], "re": "-5"}]}') == P


@pytest.mark.parametrize("source", ["t + ", "sin(x) + t", '{"d": 1, "terms": [{"exp": [1]}]', '{"d": 0, "terms": []}'])
def test_parse_rejects_malformed(source):
    with pytest.raises(SchemaError):
        parse_poly(source)


def test_arithmetic_and_calculus():
    x = MultiPoly.variable(1, 0)
    t = MultiPoly.variable(1, 1)
    P = x ** 3 * t + 2 * x - 1
    assert P.derivative([1, 0]) == 3 * x ** 2 * t + 2
    assert P.derivative([2, 1]) == 6 * x
    assert P.derivative([4, 0]).is_zero()
    assert P.evaluate([Fraction(1, 2), 2]) == CRational(Fraction(1, 4) + 1 - 1)
    assert P.evaluate([0.5, 2.0]) == pytest.approx(0.25)
    assert P.reflect() == x ** 3 * t - 2 * x - 1
    assert P.coefficient_in_t(1) == x ** 3


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        MultiPoly.variable(1, 0) + MultiPoly.variable(2, 0)
    with pytest.raises(DimensionMismatch):
        MultiPoly.variable(1, 0).evaluate([1, 2, 3])


def test_decompose_heat(heat):
    assert heat.m == 1
    assert heat.Q[1] == MultiPoly.constant(1, 1)
    assert heat.Q[0] == MultiPoly.monomial(1, (2, 0), -I)
    assert heat.recursion_check
    assert heat.P_j(1) == MultiPoly.constant(1, 1)


def test_decompose_laplace_family(laplace):
    t = MultiPoly.variable(1, 1)
    assert laplace.m == 2
    assert laplace.Q[1].is_zero()
    assert laplace.P_j(1) == t
    assert laplace.P_j(2) == MultiPoly.constant(1, 1)
    assert laplace.pcheck == laplace.P
    assert laplace.recursion_check


def test_decompose_normalizes_leading_coefficient():
    profile = decompose_t(parse_poly("2*t - 4*x**2"))
    assert profile.scale == 2
    assert profile.Q[0] == MultiPoly.monomial(1, (2, 0), -2)


def test_decompose_rejects():
    with pytest.raises(NonConstantLeading):
        decompose_t(parse_poly("x*t + x**2"))
    with pytest.raises(ConstantPoly):
        decompose_t(parse_poly("3"))


def test_reflected_profile(cauchy_riemann):
    reflected = cauchy_riemann.reflected()
    assert reflected.scale == -1
    assert reflected.P == parse_poly("t - I*x")


@settings(max_examples=40, deadline=None)
@given(profiles_polys())
def test_reassembly_is_exact(P):
    profile = decompose_t(P)
    assert reassemble(profile.Q) == P
    assert profile.recursion_check


@settings(max_examples=40, deadline=None)
@given(x_polys(), x_polys(), st.sampled_from([(1, 0), (0, 1)]))
def test_product_rule(A, B, order):
    lhs = (A * B).derivative(order)
    rhs = A.derivative(order) * B + A * B.derivative(order)
    assert lhs == rhs


@settings(max_examples=40, deadline=None)
@given(x_polys(), x_polys(), st.fractions(min_value=-3, max_value=3, max_denominator=7))
def test_evaluation_is_multiplicative(A, B, x):
    point = [x, Fraction(0)]
    assert (A * B).evaluate(point) == A.evaluate(point) * B.evaluate(point)
