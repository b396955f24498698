"""
Tests for the one-dimensional fundamental solution.
"""

import math

import numpy as np
import pytest

from algebra.polyops import decompose_t, parse_poly
from algebra.symfun import SymFun
from boundary.fundsol import FundamentalSolution1D, fundamental_solution_1d
from shared.errors import AdmissibilityFailure, DimensionMismatch, SchemaError


def test_heat_symbol_and_contour(heat):
    E = FundamentalSolution1D(heat)
    assert E.root_bound == pytest.approx(1.0)
    assert E.amplitude == pytest.approx(3.0)
    np.testing.assert_allclose(E.roots(np.array([2.0]))[0], [4j])


def test_heat_kernel_in_time(heat):
    E = FundamentalSolution1D(heat)
    t = np.array([-0.5, 0.1, 0.5])
    # K(xi, t) = i H(t) exp(-t xi^2), on both sides of |xi| = R
    for xi in (0.5, 3.0):
        expected = np.where(t > 0, 1j * np.exp(-t * xi ** 2), 0.0)
        np.testing.assert_allclose(E.kernel(xi, t), expected, atol=1e-12)


def test_laplace_kernel_in_time(laplace):
    E = FundamentalSolution1D(laplace)
    t = np.array([-0.4, 0.3])
    # K(xi, t) = exp(-|t| |xi|) / (2 |xi|) outside the shifted-contour ball
    for xi in (2.0, -3.0):
        np.testing.assert_allclose(E.kernel(xi, t), np.exp(-np.abs(t * xi)) / (2 * abs(xi)), atol=1e-10)


@pytest.mark.parametrize("fixture", ["heat", "laplace"])
def test_delta_check(request, fixture):
    E = fundamental_solution_1d(request.getfixturevalue(fixture))
    gauss = SymFun.gaussian(1)
    check = E.delta_check(gauss, gauss)
    assert check["expected"] == [pytest.approx(1.0), pytest.approx(0.0)]
    assert check["error"] < 1e-3
    shifted = E.delta_check(SymFun.gaussian(1, width=2, center=["1/4"]), SymFun.gaussian(1, center=["1/8"]))
    assert shifted["error"] < 1e-3


def test_heat_fundamental_solution_vanishes_before_zero(heat):
    E = FundamentalSolution1D(heat)
    assert E.evaluate(0.3, -0.25) == 0


@pytest.mark.slow
def test_heat_fundamental_solution_value(heat):
    E = FundamentalSolution1D(heat)
    assert abs(E.evaluate(0.0, 0.25) - 1j / math.sqrt(math.pi)) < 1e-5
    assert abs(E.evaluate(0.5, 0.25) - 1j * math.exp(-0.25) / math.sqrt(math.pi)) < 1e-5


@pytest.mark.slow
def test_heat_regularity(heat):
    assert FundamentalSolution1D(heat).regularity(levels=4) == pytest.approx(0.5, abs=0.02)


def test_rejections(heat, anisotropic):
    with pytest.raises(AdmissibilityFailure):
        FundamentalSolution1D(heat, amplitude=0.5)
    with pytest.raises(DimensionMismatch):
        FundamentalSolution1D(anisotropic)
    with pytest.raises(AdmissibilityFailure):
        FundamentalSolution1D(decompose_t(parse_poly("t**2 - x**2")))
    with pytest.raises(SchemaError):
        FundamentalSolution1D(heat).evaluate(0.0, 0.0)


def test_report(heat):
    gauss = SymFun.gaussian(1)
    report = FundamentalSolution1D(heat).report(checks=[(gauss, gauss)])
    assert report.amplitude == pytest.approx(3.0)
    assert len(report.delta_checks) == 1
    assert report.regularity_s is None
