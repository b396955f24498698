"""
Tests for Cauchy tables, formal solutions and extension builds.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algebra.polyops import MultiPoly, decompose_t, parse_poly
from algebra.rational import I
from algebra.symfun import SymFun
from analysis.weights import WeightSeq, fit_m2
from extension.cauchyext import (
    FormalSolution,
    build_extension,
    cauchy_explicit,
    cauchy_recursive,
    e_weight,
    fit_cauchy_growth,
    h_trend,
    verify_extension,
)
from shared.errors import ConditionViolation, OrderTooSmall, SchemaError
from shared.models import ExtensionMode

X = np.linspace(-2.0, 2.0, 41)


@st.composite
def x_exponents(draw, d):
    """Exponent tuples in x of total degree at most 4, with no t."""
    exp = []
    budget = 4
    for _ in range(d):
        e = draw(st.integers(0, budget))
        exp.append(e)
        budget -= e
    return tuple(exp) + (0,)


@st.composite
def random_profiles(draw):
    """Monic-in-t polynomials t^m + sum_{k<m} Q_k(x) t^k, d <= 2, with small integer Q_k of degree <= 4."""
    d = draw(st.integers(1, 2))
    m = draw(st.integers(1, 3))
    t = MultiPoly.variable(d, d)
    P = t ** m
    for k in range(m):
        coeffs = draw(st.dictionaries(x_exponents(d), st.integers(-3, 3), max_size=3))
        P = P + MultiPoly.from_dict(d, coeffs) * t ** k
    return decompose_t(P)


def test_heat_table_is_a_power_of_i_x_squared(heat):
    table = cauchy_recursive(heat, 6)
    x2 = MultiPoly.monomial(1, (2, 0), I)
    for l in range(7):
        assert table[l] == x2 ** l
    assert table.identity_holds()


def test_laplace_table(laplace):
    table = cauchy_recursive(laplace, 5)
    expected = ["0", "1", "0", "-x**2", "0", "x**4"]
    assert [op for op in table.ops] == [parse_poly(e, 1) for e in expected]
    assert table.identity_holds()


@pytest.mark.parametrize("fixture", ["heat", "laplace", "anisotropic", "cauchy_riemann"])
def test_recursive_and_explicit_tables_agree(request, fixture):
    profile = request.getfixturevalue(fixture)
    l_max = profile.m + 8
    recursive = cauchy_recursive(profile, l_max)
    explicit = cauchy_explicit(profile, l_max)
    assert recursive.ops == explicit.ops
    assert explicit.provenance == "explicit"
    assert explicit.identity_holds()


@settings(max_examples=20, deadline=None)
@given(random_profiles(), st.integers(0, 5))
def test_tables_agree_on_random_profiles(profile, extra):
    assert profile.d <= 2
    assert all(op.degree() <= 4 for op in profile.Q if not op.is_zero())
    l_max = profile.m + extra
    assert cauchy_recursive(profile, l_max).ops == cauchy_explicit(profile, l_max).ops


def test_table_depth_below_order(laplace):
    with pytest.raises(SchemaError):
        cauchy_recursive(laplace, 1)
    with pytest.raises(SchemaError):
        cauchy_explicit(laplace, 1)


def test_e_weight():
    assert e_weight(0, 0.0) == 1
    assert e_weight(1, 0.0) == 0
    assert e_weight(-1, 0.3) == 0
    assert e_weight(2, 0.5) == pytest.approx(-0.125)
    assert e_weight(3, -1.0) == pytest.approx(1j / 6)


def test_heat_formal_solution_matches_heat_semigroup(heat, gauss):
    solution = FormalSolution(cauchy_recursive(heat, 20), gauss, 20)
    assert solution.at_zero() == gauss
    for t in (-0.05, -0.02, 0.0, 0.03, 0.05):
        exact = np.exp(-X ** 2 / (1 + 4 * t)) / np.sqrt(1 + 4 * t)
        np.testing.assert_allclose(solution(X, t), exact, atol=1e-8)


def test_formal_solution_order_limit(heat, gauss):
    with pytest.raises(SchemaError):
        FormalSolution(cauchy_recursive(heat, 4), gauss, 5)


def test_plain_extension_has_exact_traces(laplace, gauss):
    data = [gauss, gauss.shift([1])]
    build = build_extension(laplace, None, data, ExtensionMode.PLAIN, order=6)
    assert build.traces_exact()
    traces = build.traces()
    assert traces[0] == data[0] and traces[1] == data[1]
    np.testing.assert_allclose(build.evaluate(X, 0.0), gauss.evaluate(X), atol=1e-14)
    # D_t Phi(., 0) = phi_1
    np.testing.assert_allclose(build.evaluate(X, 0.0, 1), data[1].evaluate(X), atol=1e-12)


@pytest.mark.parametrize("fixture, N", [("heat", 3), ("heat", 5), ("heat", 8), ("laplace", 3)])
def test_finite_order_residual_slope(request, gauss, fixture, N):
    profile = request.getfixturevalue(fixture)
    data = [SymFun.zero(1)] * (profile.m - 1) + [gauss]
    build = build_extension(profile, None, data, ExtensionMode.FINITE_ORDER, order=N)
    assert build.n == N + profile.m - 1
    report = verify_extension(build)
    assert report.traces_exact
    assert report.slope == pytest.approx(N, abs=0.2)


def test_residual_agrees_with_applying_the_operator(heat, gauss):
    build = build_extension(heat, None, [gauss], ExtensionMode.FINITE_ORDER, order=3)
    t = 2.0 ** -4
    np.testing.assert_allclose(build.apply(heat.P, X, t), build.residual(X, t), atol=1e-10)


def test_gevrey_cutoff_branch(heat, gauss):
    build = build_extension(heat, None, [gauss], ExtensionMode.GEVREY, M=WeightSeq.gevrey(2.0), h=1.0, amplitude=1.0)
    assert build.n == 12
    assert not build.info["convergent"]
    assert build.traces_exact()


@pytest.mark.parametrize("h", [0.5, 1.0, 2.0])
def test_gevrey_weighted_residual_is_monotone(heat, gauss, h):
    build = build_extension(heat, None, [gauss], ExtensionMode.GEVREY, M=WeightSeq.gevrey(2.0), h=h, amplitude=1.0)
    report = verify_extension(build)
    assert report.traces_exact
    assert report.monotone
    assert report.fitted_l is not None


def test_h_trend_reports_each_h(heat, gauss):
    hs = [0.5, 1.0, 2.0]
    trend = h_trend(heat, [gauss], WeightSeq.gevrey(2.0), hs=hs, amplitude=1.0)
    assert [h for h, _ in trend] == hs
    assert all(L is not None and L > 0 for _, L in trend)


def test_gevrey_fitted_amplitude(heat, gauss):
    M = WeightSeq.gevrey(2.0)
    build = build_extension(heat, None, [gauss], ExtensionMode.GEVREY, M=M, h=1.0)
    L1 = fit_cauchy_growth(cauchy_recursive(heat, 9), gauss, M, 1.0, 2.0)
    H = fit_m2(M)[1]
    assert build.info["amplitude"] == pytest.approx(8.0 * L1 * H ** 2)
    assert build.info["amplitude_fitted"]
    # a larger amplitude clears the cutoff earlier than A = 1
    assert build.n < 12
    assert build.traces_exact()
    report = verify_extension(build)
    assert report.amplitude == pytest.approx(build.info["amplitude"])
    assert report.amplitude_fitted
    assert report.cauchy_growth_l1 == pytest.approx(L1)
    assert report.m2_h == pytest.approx(H)
    pinned = verify_extension(build_extension(heat, None, [gauss], ExtensionMode.GEVREY, M=M, h=1.0, amplitude=1.0))
    assert pinned.amplitude == 1.0
    assert not pinned.amplitude_fitted
    assert pinned.cauchy_growth_l1 is None


def test_gevrey_convergent_branch_residual_vanishes(heat, gauss):
    build = build_extension(heat, None, [gauss], ExtensionMode.GEVREY, M=WeightSeq.gevrey(0.5), h=1.0)
    assert build.info["convergent"]
    assert build.traces_exact()
    for k in range(4, 11):
        t = 2.0 ** -k
        scale = max(1.0, float(np.max(np.abs(build.evaluate(X, t)))))
        assert np.max(np.abs(build.residual(X, t))) <= 1e-12 * scale
    report = verify_extension(build)
    assert report.convergent_branch
    assert report.monotone


def test_extension_is_linear_in_the_data(laplace, gauss):
    first = [gauss, gauss.shift([1])]
    second = [SymFun.gaussian(1, width=2, center=["1/4"]), gauss]
    total = [a + b for a, b in zip(first, second)]
    builds = [build_extension(laplace, None, data, ExtensionMode.FINITE_ORDER, order=3)
              for data in (first, second, total)]
    t = 2.0 ** -5
    for j in (0, 1):
        np.testing.assert_allclose(builds[2].evaluate(X, t, j),
                                   builds[0].evaluate(X, t, j) + builds[1].evaluate(X, t, j), atol=1e-12)
    np.testing.assert_allclose(builds[2].residual(X, t), builds[0].residual(X, t) + builds[1].residual(X, t),
                               atol=1e-12)
    assert all(build.traces_exact() for build in builds)


def test_cauchy_growth_constant(heat, gauss):
    table = cauchy_recursive(heat, 8)
    L1 = fit_cauchy_growth(table, gauss, WeightSeq.gevrey(2.0), 1.0, 2.0)
    assert 0 < L1 < np.inf


def test_extension_rejections(heat, laplace, gauss):
    with pytest.raises(OrderTooSmall):
        build_extension(heat, None, [gauss], ExtensionMode.PLAIN, order=0)
    with pytest.raises(OrderTooSmall):
        build_extension(heat, None, [gauss], ExtensionMode.FINITE_ORDER, order=0)
    with pytest.raises(SchemaError):
        build_extension(laplace, None, [gauss], ExtensionMode.PLAIN)
    with pytest.raises(ConditionViolation):
        build_extension(heat, None, [gauss], ExtensionMode.GEVREY)
    with pytest.raises(ConditionViolation):
        build_extension(heat, None, [gauss], ExtensionMode.GEVREY, M=WeightSeq.gevrey(0.4))
