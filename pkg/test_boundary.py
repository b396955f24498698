"""
Tests for closed-form kernels, quadrature helpers, the Stokes identity and
the two boundary-value evaluators.
"""

import math

import numpy as np
import pytest

from algebra.polyops import parse_poly
from algebra.rational import I
from algebra.symfun import BumpFun, SymFun, TensorTest
from boundary.growth import growth_fit, sup_profile
from boundary.kernels import ClosedForm, make_kernel, reference_polynomial, verify_zero_solution
from boundary.pairing import bv_direct, bv_stokes, bv_t_derivatives, stokes_check
from boundary.quadrature import (
    composite_nodes,
    decaying,
    detect_order,
    graded_edges,
    quad_complex,
    richardson,
)
from shared.errors import KindProfileMismatch, SchemaError

KERNELS = [
    ("heat_kernel", "heat", 1.0 + 0j, 1e-4),
    ("poisson_kernel", "laplace", 2.0 + 0j, 1e-4),
    ("cauchy_kernel", "cauchy_riemann", -2j * math.pi, 1e-3),
]


# kernels


@pytest.mark.parametrize("kind, fixture, _value, _tol", KERNELS)
def test_reference_kernels_are_zero_solutions(request, kind, fixture, _value, _tol):
    f = make_kernel(kind, request.getfixturevalue(fixture))
    assert verify_zero_solution(f) < 1e-8
    assert parse_poly(reference_polynomial(kind)) == f.profile.P


def test_heat_kernel_vanishes_for_negative_t(heat):
    f = make_kernel("heat_kernel", heat)
    assert f(0.0, 0.25) == pytest.approx(1 / math.sqrt(math.pi))
    assert f(0.3, -0.25) == 0


def test_kernel_profile_mismatch(laplace):
    with pytest.raises(KindProfileMismatch):
        make_kernel("heat_kernel", laplace)
    with pytest.raises(SchemaError):
        make_kernel("mystery", laplace)
    with pytest.raises(SchemaError):
        make_kernel("custom", laplace)


def test_custom_non_solution_is_flagged(laplace):
    f = make_kernel("custom", laplace, expr="x**2*t")
    assert verify_zero_solution(f) > 1e-3


def test_closed_form_calculus():
    f = ClosedForm.from_string("x**2*t")
    x, t = np.array([0.5, 1.0]), 0.3
    np.testing.assert_allclose(f.partial((1, 1), x, t), 2 * x)
    # (D_t^2 + D_x^2)(x^2 t) = -2t
    P = parse_poly("t**2 + x**2")
    np.testing.assert_allclose(f.apply(P, x, t), -2 * t)
    np.testing.assert_allclose(f.derivative(P)(x, t), -2 * t)
    with pytest.raises(SchemaError):
        ClosedForm.from_string("y + t")


# quadrature


def test_composite_gauss_legendre():
    nodes, weights = composite_nodes(graded_edges(1.0, 3))
    assert np.sum(weights * nodes ** 2) == pytest.approx(2 / 3)
    assert np.sum(weights * np.cos(nodes)) == pytest.approx(2 * math.sin(1.0))


def test_graded_edges():
    edges = graded_edges(1.0, 3, step=0.5, centers=(0.25,))
    assert edges[0] == -1.0 and edges[-1] == 1.0
    assert 0.25 in edges
    assert 0.25 + 0.5 / 8 in edges
    assert np.all(np.diff(edges) > 0)


def test_quad_complex():
    value, error = quad_complex(lambda x: np.exp(1j * x), 0.0, math.pi)
    assert value == pytest.approx(2j)
    assert error < 1e-8


def test_richardson_removes_leading_error():
    values = [1.0 + 0.5 ** k + 0.25 ** k for k in range(8)]
    assert detect_order(values, 1e-14) == pytest.approx(1.0, abs=0.05)
    result = richardson(values)
    assert result.value == pytest.approx(1.0, abs=1e-10)
    assert detect_order(values[:2], 1e-14) is None


def test_decaying():
    assert decaying([1.0, 0.5, 0.25, 0.125], 1.5, 1e-11)
    assert not decaying([1.0, 1.5, 1.0, 1.5], 1.5, 1e-11)
    assert decaying([1.0, 1.0, 1.0, 1.0], 1.5, 1e-11)


# Stokes identity


def test_stokes_identity_for_a_non_solution(laplace, gauss):
    f = ClosedForm.from_string("x**2*t")
    field = TensorTest(gauss, BumpFun(1.0, 2.0))
    result = stokes_check(f, field, laplace, 0.1, 1.0)
    assert result.abs_diff < 1e-6


def test_stokes_identity_for_heat_kernel(heat, gauss):
    f = make_kernel("heat_kernel", heat)
    field = TensorTest(gauss, BumpFun(1.0, 2.0))
    result = stokes_check(f, field, heat, 0.05, 0.5)
    assert result.abs_diff < 1e-6
    with pytest.raises(SchemaError):
        stokes_check(f, field, heat, 0.5, 0.05)


# boundary values


@pytest.mark.parametrize("kind, fixture, value, tol", KERNELS)
def test_bv_direct(request, gauss, kind, fixture, value, tol):
    f = make_kernel(kind, request.getfixturevalue(fixture))
    result = bv_direct(f, gauss)
    assert abs(result.complex_value - value) < tol
    assert result.trail[0].t == pytest.approx(0.25)


@pytest.mark.parametrize("kind, fixture, value, tol", KERNELS)
def test_bv_stokes_agrees_with_direct(request, gauss, kind, fixture, value, tol):
    profile = request.getfixturevalue(fixture)
    f = make_kernel(kind, profile)
    stokes = bv_stokes(f, gauss, profile.m - 1)
    assert abs(stokes.complex_value - value) < tol
    assert abs(stokes.complex_value - bv_direct(f, gauss).complex_value) < 1e-3
    assert stokes.slot == profile.m - 1


def test_bv_moves_derivatives_onto_the_test_function(heat):
    f = make_kernel("heat_kernel", heat)
    phi = SymFun.gaussian(1, center=["1/4"])
    # <D_x f, phi> = <f, -D_x phi> and -D_x = i d/dx
    lhs = bv_direct(f.derivative(parse_poly("x", 1)), phi).complex_value
    rhs = bv_direct(f, phi.differentiate(0).scale(I)).complex_value
    assert abs(lhs - rhs) < 1e-4
    assert abs(lhs - 0.5j * math.exp(-1 / 16)) < 1e-3


def test_zero_jump_has_no_boundary_value(heat, gauss):
    f = make_kernel("zero_jump", heat, expr="exp(x + t)")
    assert abs(bv_direct(f, gauss).complex_value) < 1e-6


def test_bv_stokes_rejects_bad_slot(heat, gauss):
    with pytest.raises(SchemaError):
        bv_stokes(make_kernel("heat_kernel", heat), gauss, 1)


def test_poisson_t_derivatives(laplace, gauss):
    values = bv_t_derivatives(make_kernel("poisson_kernel", laplace), gauss)
    assert abs(values[0] - 2.0) < 1e-4
    assert abs(values[1]) < 1e-4


# growth


@pytest.mark.parametrize("kind, fixture, slope", [
    ("heat_kernel", "heat", -0.5),
    ("poisson_kernel", "laplace", -1.0),
    ("cauchy_kernel", "cauchy_riemann", -1.0),
])
def test_growth_is_polynomial_of_order_one(request, kind, fixture, slope):
    fit = growth_fit(make_kernel(kind, request.getfixturevalue(fixture)))
    assert fit.n == 1
    assert fit.kind == "polynomial"
    assert fit.slope == pytest.approx(slope, abs=0.02)


def test_sup_profile_of_heat_kernel(heat):
    ts = np.array([0.25, 0.0625])
    np.testing.assert_allclose(sup_profile(make_kernel("heat_kernel", heat), ts), 1 / np.sqrt(4 * np.pi * ts))
