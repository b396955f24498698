"""
Tests for weight sequences, condition verdicts and associated functions.
"""

import math
import os

import numpy as np
import pytest

from analysis.weights import (
    WeightSeq,
    check_conditions,
    fit_m2,
    floor_power_fit,
    gamma_cut,
    load_sequence_csv,
    omega,
    omega_array,
    power_identity_check,
    relation,
    rescale,
    stationary_identity,
    transform,
)
from shared.errors import FileError, SchemaError, TruncationSuspect
from shared.models import RelationKind, VerdictStatus


@pytest.mark.parametrize("sigma", [1.2, 1.5, 2.0, 3.0])
@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_m4_for_gevrey_needs_a_sigma_at_least_one(sigma, a):
    report = check_conditions(WeightSeq.gevrey(sigma), a=a)
    expected = VerdictStatus.HOLDS if a * sigma >= 1 else VerdictStatus.FAILS
    assert report.m4.status == expected
    assert report.m4.name == f"M.4_{a:g}"
    if expected == VerdictStatus.FAILS:
        p, q = report.m4.witness
        assert p <= q


def test_gevrey_two_basic_conditions():
    report = check_conditions(WeightSeq.gevrey(2.0))
    assert report.m1.status == VerdictStatus.HOLDS
    assert report.m2.status == VerdictStatus.HOLDS
    assert report.m3_prime.status == VerdictStatus.HOLDS
    assert report.m3_prime.constants["slope"] == pytest.approx(-2.0, abs=0.1)
    assert report.m4 is None


def test_dichotomy_against_gevrey():
    assert check_conditions(WeightSeq.gevrey(2.0), a=0.5).dichotomy == RelationKind.ASYMP.value
    assert check_conditions(WeightSeq.gevrey(2.0), a=1.0).dichotomy == RelationKind.PREC.value


def test_planted_csv_breaks_log_convexity(corpus_dir):
    M = load_sequence_csv(os.path.join(corpus_dir, "data", "planted_m1.csv"))
    assert M.p_max >= 50
    report = check_conditions(M)
    assert report.m1.status == VerdictStatus.FAILS
    assert report.m1.witness == [9]


def test_sequence_input_errors(tmp_path):
    with pytest.raises(FileError):
        load_sequence_csv(str(tmp_path / "missing.csv"))
    gappy = tmp_path / "gappy.csv"
    gappy.write_text("index,value\n0,1\n1,1\n3,6\n")
    with pytest.raises(SchemaError):
        load_sequence_csv(str(gappy))
    with pytest.raises(SchemaError):
        WeightSeq.explicit([2.0, 1.0, 2.0])
    with pytest.raises(SchemaError):
        WeightSeq.explicit([1.0, 1.0, -2.0])
    with pytest.raises(SchemaError):
        check_conditions(WeightSeq.gevrey(2.0, 40))


@pytest.mark.parametrize("sigma", [1.5, 2.0])
@pytest.mark.parametrize("rho", [1e2, 1e4, 1e6])
def test_omega_tracks_power_law(sigma, rho):
    M = WeightSeq.gevrey(sigma, int(3 * rho ** (1 / sigma)) + 60)
    result = omega(M, rho)
    ratio = result.value / (sigma * rho ** (1 / sigma))
    assert 0.5 < ratio < 1.0
    assert result.p == pytest.approx(rho ** (1 / sigma), rel=0.15)


def test_omega_edge_cases():
    M = WeightSeq.gevrey(2.0, 60)
    assert omega(M, 0.0).value == 0.0
    assert omega(M, 0.5).value == 0.0
    with pytest.raises(TruncationSuspect):
        omega(M, 1e6)
    with pytest.raises(SchemaError):
        omega(M, -1.0)
    rhos = np.array([0.0, 2.0, 50.0])
    np.testing.assert_allclose(omega_array(M, rhos), [omega(M, r).value for r in rhos])


def test_omega_of_bounded_sequence():
    M = WeightSeq.explicit([1.0] * 60)
    assert omega(M, 0.9).value == 0.0
    assert math.isinf(omega(M, 1.1).value)


def test_stationary_identity_for_factorial():
    Mstar = transform(WeightSeq.gevrey(2.0), 1.0, star=True)
    np.testing.assert_allclose(Mstar.log_values, WeightSeq.gevrey(1.0).log_values, atol=1e-9)
    assert gamma_cut(Mstar, 0.01) in (99, 100)
    lhs, rhs = stationary_identity(Mstar, 0.01)
    assert abs(lhs - rhs) / rhs < 1e-10


def test_power_identity():
    assert power_identity_check(WeightSeq.gevrey(1.0), 2.0, [10.0, 100.0, 1000.0]) < 1e-9


def test_transforms():
    M = WeightSeq.gevrey(1.0, 80)
    np.testing.assert_allclose(transform(M, 2.0).log_values, WeightSeq.gevrey(2.0, 80).log_values)
    scaled = rescale(M, 3.0)
    assert scaled.log(5) == pytest.approx(M.log(5) + 5 * math.log(3.0))
    assert M.truncate(50).p_max == 50
    with pytest.raises(SchemaError):
        transform(M, 0.0)


def test_relations():
    slow, fast = WeightSeq.gevrey(1.0), WeightSeq.gevrey(2.0)
    assert relation(slow, fast).kind == RelationKind.PREC
    same = relation(fast, fast)
    assert same.kind == RelationKind.ASYMP
    assert same.L == pytest.approx(1.0)
    assert relation(fast, slow).kind == RelationKind.NONE


def test_fitted_constants():
    C, H = fit_m2(WeightSeq.gevrey(1.0))
    assert C >= 1.0
    assert 1.5 < H <= 2.0
    fit = floor_power_fit(WeightSeq.gevrey(1.0), 2.0)
    # (2p)! <= 4^p (p!)^2
    assert fit.L == pytest.approx(4.0)
    assert fit.C == pytest.approx(1.0)
