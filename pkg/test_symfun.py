"""
Tests for Hermite-Gaussian test functions, bumps and tensor test fields.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from algebra.polyops import MultiPoly, parse_poly
from algebra.symfun import (
    BumpFun,
    DerivativeTable,
    SymFun,
    TensorTest,
    apply_operator,
    fourier_1d,
    integrate_product,
    seminorm,
)
from analysis.weights import WeightSeq
from shared.errors import DimensionMismatch, OrderTooHigh, SchemaError, TDependence
from shared.models import SeminormQuery

X = np.linspace(-3.0, 3.0, 61)


@st.composite
def symfuns(draw):
    """One-dimensional SymFuns with up to three small terms."""
    items = []
    for _ in range(draw(st.integers(1, 3))):
        exp = draw(st.integers(0, 3))
        width = draw(st.sampled_from([Fraction(1, 2), Fraction(1), Fraction(2)]))
        center = draw(st.sampled_from([Fraction(0), Fraction(1, 4), Fraction(-1)]))
        coeff = draw(st.integers(-3, 3))
        items.append((((exp,), width, (center,)), coeff))
    return SymFun.from_terms(1, items)


def test_gaussian_values_and_derivative(gauss):
    np.testing.assert_allclose(gauss.evaluate(X), np.exp(-X ** 2))
    np.testing.assert_allclose(gauss.differentiate(0).evaluate(X), -2 * X * np.exp(-X ** 2), atol=1e-14)
    second = gauss.derivative([2]).evaluate(X)
    np.testing.assert_allclose(second, (4 * X ** 2 - 2) * np.exp(-X ** 2), atol=1e-13)


def test_shift_and_times_poly():
    f = SymFun.gaussian(1, width=2, center=[Fraction(1, 4)])
    np.testing.assert_allclose(f.evaluate(X), np.exp(-2 * (X - 0.25) ** 2))
    g = SymFun.gaussian(1).shift([1])
    np.testing.assert_allclose(g.evaluate(X), np.exp(-(X - 1) ** 2))
    x = MultiPoly.variable(1, 0)
    h = g.times_poly(x ** 2 + 1)
    np.testing.assert_allclose(h.evaluate(X), (X ** 2 + 1) * np.exp(-(X - 1) ** 2), atol=1e-13)


def test_times_poly_rejects_t(gauss):
    with pytest.raises(TDependence):
        gauss.times_poly(MultiPoly.variable(1, 1))


def test_apply_operator_uses_minus_i_derivative(gauss):
    # x^2 (D) = -d^2/dx^2
    Q = parse_poly("x**2", 1)
    values = apply_operator(Q, gauss).evaluate(X)
    np.testing.assert_allclose(values, -(4 * X ** 2 - 2) * np.exp(-X ** 2), atol=1e-13)
    # x (D) = -i d/dx
    values = apply_operator(parse_poly("x", 1), gauss).evaluate(X)
    np.testing.assert_allclose(values, 2j * X * np.exp(-X ** 2), atol=1e-14)


def test_integrate_product_closed_form():
    g = SymFun.gaussian(1)
    assert integrate_product(g, g) == pytest.approx(math.sqrt(math.pi / 2))
    shifted = g.shift([1])
    assert integrate_product(g, shifted) == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-0.5))
    x2 = g.times_poly(parse_poly("x**2", 1))
    # int x^2 exp(-2x^2) = sqrt(pi/2) / 4
    assert integrate_product(x2, g) == pytest.approx(math.sqrt(math.pi / 2) / 4)


def test_integrate_product_two_dimensions():
    g = SymFun.gaussian(2)
    assert integrate_product(g, g) == pytest.approx(math.pi / 2)
    with pytest.raises(DimensionMismatch):
        integrate_product(g, SymFun.gaussian(1))


def test_fourier_transform():
    xi = np.linspace(-6.0, 6.0, 25)
    g = SymFun.gaussian(1)
    np.testing.assert_allclose(fourier_1d(g, xi), math.sqrt(math.pi) * np.exp(-xi ** 2 / 4), atol=1e-14)
    shifted = SymFun.gaussian(1, width=2, center=[Fraction(1, 4)])
    expected = math.sqrt(math.pi / 2) * np.exp(-xi ** 2 / 8) * np.exp(-0.25j * xi)
    np.testing.assert_allclose(fourier_1d(shifted, xi), expected, atol=1e-14)
    # transform of f' is i xi times the transform of f
    np.testing.assert_allclose(fourier_1d(g.differentiate(0), xi), 1j * xi * fourier_1d(g, xi), atol=1e-13)


def test_derivative_table_matches_exact_derivatives():
    f = SymFun.from_terms(1, [(((1,), Fraction(1), (Fraction(1, 4),)), 2), (((0,), Fraction(2), (Fraction(-1),)), -1)])
    table = DerivativeTable(f, X, 5)
    for k in range(6):
        np.testing.assert_allclose(table.partial((k,)), f.derivative([k]).evaluate(X), atol=1e-10)
    assert table.covers([5])
    assert not table.covers([6])
    with pytest.raises(OrderTooHigh):
        table.partial((6,))
    Q = parse_poly("x**3 - 2*x", 1)
    np.testing.assert_allclose(table.apply(Q), apply_operator(Q, f).evaluate(X), atol=1e-10)


def test_seminorm_picks_the_largest_weighted_derivative(gauss):
    M = WeightSeq.gevrey(1.0, 60)
    result = seminorm(gauss, SeminormQuery(M=M, h=1.0, K=[(-3.0, 3.0)], a_max=1))
    assert result.value == pytest.approx(1.0)
    assert result.alpha == (0,)
    assert result.x == pytest.approx((0.0,))
    assert seminorm(SymFun.zero(1), SeminormQuery(M=M, h=1.0, K=[(-3.0, 3.0)], a_max=4)).value == 0.0


def test_seminorm_is_nonincreasing_in_h(gauss):
    M = WeightSeq.gevrey(1.0, 60)
    values = [seminorm(gauss, SeminormQuery(M=M, h=h, K=[(-3.0, 3.0)], a_max=6)).value for h in (0.25, 0.5, 1.0, 2.0)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert values[0] > values[-1]


def test_seminorm_query_validation(gauss):
    M = WeightSeq.gevrey(1.0, 60)
    with pytest.raises(ValidationError):
        SeminormQuery(M=M, h=0.0, K=[(-3.0, 3.0)], a_max=2)
    with pytest.raises(ValidationError):
        SeminormQuery(M=M, h=1.0, K=[(-3.0, 3.0)], a_max=0)
    with pytest.raises(DimensionMismatch):
        seminorm(gauss, SeminormQuery(M=M, h=1.0, K=[(-3.0, 3.0)] * 2, a_max=2))


def test_support_radius_contains_envelope(gauss):
    r = gauss.support_radius()
    assert math.exp(-r ** 2) < 1e-16
    assert SymFun.gaussian(1, center=[3]).support_radius() > r


def test_json_round_trip():
    f = SymFun.from_terms(1, [(((2,), Fraction(1, 2), (Fraction(-1),)), 3)])
    assert SymFun.from_json(f.to_json()) == f


def test_from_json_rejects_malformed():
    with pytest.raises(SchemaError):
        SymFun.from_json({"d": 1})
    with pytest.raises(SchemaError):
        SymFun.from_json({"d": 1, "terms": [{"exp": [0], "width": "-1", "center": ["0"]}]})


def test_bump_shape():
    b = BumpFun(1.0, 2.0)
    t = np.array([-3.0, -2.0, -1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5])
    values = b(t)
    np.testing.assert_allclose(values[[0, 1, 7, 8]], 0.0)
    np.testing.assert_allclose(values[[2, 3, 4, 5]], 1.0)
    assert 0.0 < values[6] < 1.0
    # even function, odd first derivative
    assert b(1.3) == pytest.approx(b(-1.3))
    assert b.derivative(1.3, 1) == pytest.approx(-b.derivative(-1.3, 1))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_bump_derivatives_match_finite_differences(k):
    b = BumpFun(1.0, 2.0)
    t = np.linspace(1.2, 1.8, 7)
    step = 1e-5
    numeric = (b.derivative(t + step, k) - b.derivative(t - step, k)) / (2 * step)
    np.testing.assert_allclose(b.derivative(t, k + 1), numeric, rtol=1e-4, atol=1e-6)


def test_bump_limits():
    with pytest.raises(SchemaError):
        BumpFun(2.0, 1.0)
    with pytest.raises(OrderTooHigh):
        BumpFun(1.0, 2.0, k_max=3).derivative(1.5, 4)


def test_tensor_field_applies_operator(gauss, heat):
    time = SymFun.gaussian(1)
    field = TensorTest(gauss, time)
    t = 0.3
    # (D_t - i D_x^2)(f g) = -i f g' + i f'' g
    g, dg = math.exp(-t * t), -2 * t * math.exp(-t * t)
    f, d2f = np.exp(-X ** 2), (4 * X ** 2 - 2) * np.exp(-X ** 2)
    np.testing.assert_allclose(field.apply(heat.P, X, t), -1j * f * dg + 1j * d2f * g, atol=1e-13)
    np.testing.assert_allclose(field.evaluate(X, t, 1), -1j * f * dg, atol=1e-13)
    assert field.at_origin() == pytest.approx(1.0)


def test_tensor_field_with_bump(gauss):
    field = TensorTest(gauss, BumpFun(1.0, 2.0), lam=2.0)
    np.testing.assert_allclose(field.evaluate(X, 0.25), np.exp(-X ** 2))
    np.testing.assert_allclose(field.evaluate(X, 1.5), 0.0)


@settings(max_examples=30, deadline=None)
@given(symfuns(), st.sampled_from(["x**2 - 1", "I*x**3", "2*x + 1/3"]), st.sampled_from(["x", "x**4"]))
def test_apply_operator_is_additive_in_the_operator(f, a, b):
    A, B = parse_poly(a, 1), parse_poly(b, 1)
    assert apply_operator(A + B, f) == apply_operator(A, f) + apply_operator(B, f)


@settings(max_examples=30, deadline=None)
@given(symfuns(), symfuns())
def test_differentiation_is_linear(f, g):
    assert (f + g).differentiate(0) == f.differentiate(0) + g.differentiate(0)
    assert (f - f).is_zero()
