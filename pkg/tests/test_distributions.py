import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from stoplab.distributions import (MAX_VALUE, CalibrationError, DistributionSpec, GapStatistics,
                                   build_calibration, calibrate_shape, calibrated_specs,
                                   estimate_gap, fingerprint, get_spec, peak_gap_shape,
                                   power_gap_exact, sample, uniform_spec)

shapes = st.floats(0.05, 50.0)
unit = st.floats(0.0, 1.0)


@given(shapes, unit)
def test_quantile_inverts_cdf(a, u):
    spec = DistributionSpec(shape=a)
    assert spec.cdf(spec.quantile(u)) == pytest.approx(u, abs=1e-9)


@given(shapes, st.lists(st.floats(0, MAX_VALUE), min_size=2, max_size=20))
def test_cdf_monotone_and_bounded(a, xs):
    spec = DistributionSpec(shape=a)
    xs = np.sort(xs)
    f = spec.cdf(xs)
    assert np.all(np.diff(f) >= 0) and f.min() >= 0 and f.max() <= 1


def test_uniform_alias_and_validation():
    assert DistributionSpec("uniform") == uniform_spec(label="other")
    for bad in ({"family": "normal"}, {"shape": -1.0}, {"max_value": 0.0},
                {"label": "huge"}, {"family": "uniform", "shape": 2.0}):
        with pytest.raises(ValueError):
            DistributionSpec(**bad)


def test_custom_table_interpolates():
    spec = DistributionSpec("custom-table", max_value=10.0,
                            table=((0, 0), (5, 0.8), (10, 1.0)))
    assert spec.cdf(2.5) == pytest.approx(0.4)
    assert spec.quantile(0.9) == pytest.approx(7.5)
    with pytest.raises(ValueError):
        DistributionSpec("custom-table", max_value=10.0, table=((0, 0), (5, 0.9), (4, 1.0)))


def test_dict_roundtrip():
    for spec in calibrated_specs().values():
        assert DistributionSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def test_sample_is_seeded_and_matches_cdf():
    spec = DistributionSpec(shape=3.0)
    a, b = sample(spec, 20_000, seed=1), sample(spec, 20_000, seed=1)
    assert np.array_equal(a, b)
    res = stats.kstest(a, lambda x: spec.cdf(x))
    assert res.pvalue > 1e-3


@pytest.mark.parametrize("a", [0.2, 1.0, 7.0])
def test_exact_gap_matches_numerical_integration(a):
    # values are M * U^(1/a); integrate over the top two uniform order statistics
    n, s = 15, 1 / a
    top = integrate.quad(lambda u: u ** s * n * u ** (n - 1), 0, 1)[0]
    second = integrate.quad(lambda u: u ** s * n * (n - 1) * u ** (n - 2) * (1 - u), 0, 1)[0]
    assert power_gap_exact(a, n) == pytest.approx(MAX_VALUE * (top - second), rel=1e-8)


def test_estimated_gap_matches_closed_form():
    g = estimate_gap(DistributionSpec(shape=2.0), 15, 100_000, seed=3)
    assert abs(g.mean_gap - power_gap_exact(2.0, 15)) < 4 * g.std_error


def test_uniform_gap_is_max_over_n_plus_one():
    assert power_gap_exact(1.0, 15) == pytest.approx(MAX_VALUE / 16, rel=1e-14)


def test_gap_peaks_at_reported_shape():
    n = 15
    a0 = peak_gap_shape(n)
    g0 = power_gap_exact(a0, n)
    for f in (0.5, 0.9, 1.1, 2.0):
        assert power_gap_exact(a0 * f, n) < g0


@given(st.floats(0.0, 3.0), st.floats(0.01, 1.0))
def test_gap_decreasing_above_peak(x, dx):
    a = peak_gap_shape(15) * math.exp(x)
    assert power_gap_exact(a * math.exp(dx), 15) < power_gap_exact(a, 15)


def test_calibrate_shape_recovers_closed_form_shape():
    target = GapStatistics(15, power_gap_exact(4.0, 15))
    spec = calibrate_shape(target, replicates=50_000, seed=2)
    assert spec.shape == pytest.approx(4.0, rel=0.05)


def test_calibrate_shape_rejects_unreachable_gaps():
    with pytest.raises(CalibrationError):
        calibrate_shape(GapStatistics(15, 0.9 * MAX_VALUE), replicates=1000)
    with pytest.raises(CalibrationError):
        calibrate_shape(GapStatistics(15, 1.0), replicates=1000)


def test_shipped_calibration_is_reproducible():
    shipped = json.loads(json.dumps(build_calibration(replicates=200_000)))
    assert {k: v["shape"] for k, v in shipped["distributions"].items()} == \
        {k: s.shape for k, s in calibrated_specs().items()}


def test_labels_and_fingerprint():
    specs = calibrated_specs()
    assert specs["low"].shape < specs["medium"].shape == 1.0 < specs["high"].shape
    assert specs["low"].label == "low"
    assert fingerprint().startswith("v1-") and fingerprint() == fingerprint()
    with pytest.raises(ValueError):
        get_spec("nope")
