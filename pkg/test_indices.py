"""
Tests for semi-elliptic indices, root margins and the numeric a0 check.
"""

from fractions import Fraction

import pytest

from algebra.polyops import decompose_t, parse_poly
from analysis.indices import (
    analyze,
    anisotropy,
    b0_exact,
    principal_part,
    root_margin,
    semi_elliptic_analyze,
    verify_a0_numeric,
)
from shared.models import CaseTag, VerdictStatus


@pytest.mark.parametrize(
    "fixture, indices, case",
    [
        ("heat", ("2", "2", "1", "1/2"), CaseTag.PARABOLIC_LIKE),
        ("laplace", ("1", "1", "1", "1"), CaseTag.ELLIPTIC),
        ("anisotropic", ("1", "2", "1/2", "1/2"), CaseTag.PARABOLIC_LIKE),
        ("cauchy_riemann", ("1", "1", "1", "1"), CaseTag.ELLIPTIC),
    ],
)
def test_exact_indices(request, fixture, indices, case):
    profile = request.getfixturevalue(fixture)
    report = semi_elliptic_analyze(profile)
    assert report.semi_elliptic == VerdictStatus.HOLDS
    assert (report.a0, report.b0, report.gamma0, report.mu0) == indices
    assert report.case_tag == case
    assert report.degree_chain_holds
    assert report.degree_max_holds
    assert report.min_principal > 0


def test_degree_helpers(anisotropic, heat):
    assert anisotropy(anisotropic.P) == [2, 4, 2]
    assert b0_exact(anisotropic) == Fraction(2)
    assert b0_exact(heat) == Fraction(2)
    # lower-order terms drop out of the principal part
    P = parse_poly("t**2 + x**2 + 3*x*t + x")
    assert principal_part(P, anisotropy(P)) == parse_poly("t**2 + x**2 + 3*x*t")


def test_wave_operator_is_not_semi_elliptic():
    report = semi_elliptic_analyze(decompose_t(parse_poly("t**2 - x**2")))
    assert report.semi_elliptic != VerdictStatus.HOLDS
    assert report.case_tag == CaseTag.NOT_SEMIELLIPTIC
    assert report.a0 is None
    assert report.b0 == "1"


def test_analysis_is_seeded(laplace):
    first = semi_elliptic_analyze(laplace, seed=7)
    second = semi_elliptic_analyze(laplace, seed=7)
    assert first.min_principal == second.min_principal
    assert first.seed == 7


def test_root_margin(heat, laplace):
    margin = root_margin(heat, [2.0])
    assert margin.value == pytest.approx(4.0)
    assert margin.roots == [(pytest.approx(0.0), pytest.approx(4.0))]
    assert root_margin(laplace, [3.0]).value == pytest.approx(3.0)


@pytest.mark.parametrize("fixture, a", [("heat", 2.0), ("laplace", 1.0)])
def test_numeric_check_confirms_exact_a0(request, fixture, a):
    result = verify_a0_numeric(request.getfixturevalue(fixture), a)
    assert result.passed
    assert result.maximal
    assert result.margin_slope <= 0.03
    assert result.maximality_slope > 0.03


def test_numeric_check_rejects_too_large_exponent(heat):
    result = verify_a0_numeric(heat, 2.5)
    assert not result.passed
    assert result.margin_slope > 0.03


def test_analyze_runs_check_at_exact_a0(heat):
    report = analyze(heat)
    assert report.numeric_a0_check is not None
    assert report.numeric_a0_check.a == pytest.approx(2.0)
    assert report.numeric_a0_check.passed
