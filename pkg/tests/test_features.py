import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from probesel.primitives.features import (
    QUANTILES,
    STATISTICS,
    FeatureVector,
    interval_features,
    interval_features_batch,
    summary_stats,
    summary_stats_batch,
)

values = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def test_examples():
    assert summary_stats([1, 2, 3], {"mean"}).values.tolist() == [2.0]
    assert summary_stats([5, 5, 5, 5], {"variance", "kurtosis"}).values.tolist() == [0.0, 0.0]
    assert summary_stats([1, 2, 3, 4], (), [0.25]).values.tolist() == [1.75]


def test_quantile_linear_interpolation_oracle():
    # position q * (n - 1) between order statistics
    x = np.array([7.0, 1.0, 4.0, 2.0, 9.0])
    s = np.sort(x)
    for q in QUANTILES:
        pos = q * (len(x) - 1)
        lo = math.floor(pos)
        expected = s[lo] + (pos - lo) * (s[min(lo + 1, len(x) - 1)] - s[lo])
        assert summary_stats(x, (), [q]).values[0] == pytest.approx(expected, abs=1e-12)


def test_declaration_order_and_names():
    fv = summary_stats([1.0, 3.0, 2.0, 8.0], ["max", "mean", "count_below_mean"], [0.75, 0.1])
    assert fv.names == ("mean", "max", "count_below_mean", "q0.1", "q0.75")
    assert len(fv.values) == len(fv.names)


def test_all_statistics_against_references():
    rng = np.random.default_rng(0)
    x = rng.gamma(2.0, size=200)
    x[:10] = x[10]  # some repeated values
    fv = summary_stats(x, STATISTICS).as_dict()
    assert fv["mean"] == pytest.approx(np.mean(x))
    assert fv["std"] == pytest.approx(np.std(x, ddof=1))
    assert fv["variance"] == pytest.approx(np.var(x, ddof=1))
    assert fv["min"] == x.min() and fv["max"] == x.max()
    assert fv["median"] == pytest.approx(np.median(x))
    assert fv["skew"] == pytest.approx(scipy.stats.skew(x))
    assert fv["kurtosis"] == pytest.approx(scipy.stats.kurtosis(x, fisher=True))
    assert fv["nb_unique"] == len(set(x.tolist()))
    assert fv["count_above_mean"] == np.sum(x > x.mean())
    assert fv["count_below_mean"] == np.sum(x < x.mean())


def test_constant_series_conventions():
    fv = summary_stats([3.3] * 7, STATISTICS).as_dict()
    assert fv["skew"] == 0.0 and fv["kurtosis"] == 0.0
    assert fv["std"] == 0.0 and fv["nb_unique"] == 1.0


@given(arrays(np.float64, st.integers(2, 10_000), elements=values))
def test_mean_variance_two_pass(x):
    fv = summary_stats(x, {"mean", "variance"}).values
    mean = sum(x.tolist()) / len(x)
    var = sum((v - mean) ** 2 for v in x.tolist()) / (len(x) - 1)
    scale = max(1.0, np.max(np.abs(x)))
    assert abs(fv[0] - mean) <= 1e-12 * scale
    assert abs(fv[1] - var) <= 1e-12 * scale**2
    assert np.all(np.isfinite(summary_stats(x, STATISTICS, QUANTILES).values))


def test_batch_equals_rows():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(6, 15))
    B = summary_stats_batch(X, STATISTICS, QUANTILES)
    for i in range(6):
        assert np.array_equal(B[i], summary_stats(X[i], STATISTICS, QUANTILES).values)


def test_summary_errors():
    with pytest.raises(ValueError):
        summary_stats([1.0], {"mean"})
    with pytest.raises(ValueError):
        summary_stats([1.0, 2.0], {"entropy"})
    with pytest.raises(ValueError):
        summary_stats([1.0, 2.0], {"mean"}, [0.3])
    with pytest.raises(ValueError):
        FeatureVector(np.array([1.0]), ("a", "b"))


def test_interval_examples():
    mean, std, slope = interval_features([0, 1, 2, 3], 0, 4)
    assert mean == 1.5
    assert std == pytest.approx(1.2909944487358056)
    assert slope == pytest.approx(1.0)
    assert interval_features([4.0, 2.5, 2.5, 2.5, 9.0], 1, 3) == (2.5, 0.0, 0.0)


def test_interval_slope_closed_form():
    rng = np.random.default_rng(5)
    for _ in range(200):
        m = int(rng.integers(3, 60))
        x = rng.normal(size=m) * 10.0 ** rng.integers(-3, 4)
        start = int(rng.integers(0, m - 2))
        length = int(rng.integers(3, m - start + 1))
        w = x[start : start + length]
        idx = np.arange(start, start + length)
        slope = np.sum((w - w.mean()) * (idx - idx.mean())) / np.sum((idx - idx.mean()) ** 2)
        mean, std, got = interval_features(x, start, length)
        assert got == pytest.approx(slope, rel=1e-9, abs=1e-9)
        assert mean == pytest.approx(np.mean(w), rel=1e-12, abs=1e-12)
        assert std == pytest.approx(np.std(w, ddof=1), rel=1e-9, abs=1e-12)


def test_interval_batch_layout():
    X = np.arange(20, dtype=float).reshape(2, 10)
    F = interval_features_batch(X, [0, 5], [4, 5])
    assert F.shape == (2, 6)
    assert F[0, 3] == pytest.approx(7.0) and F[1, 2] == pytest.approx(1.0)


@pytest.mark.parametrize("start,length", [(0, 2), (-1, 3), (2, 3)])
def test_interval_errors(start, length):
    with pytest.raises(ValueError):
        interval_features([1.0, 2.0, 3.0, 4.0], start, length)
