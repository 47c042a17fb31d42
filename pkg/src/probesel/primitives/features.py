"""Summary statistics and interval features of univariate series.

Both extractors come in a single-series form returning a :class:`FeatureVector`
and a batch form working on the rows of a matrix; the batch form is what the
classifiers use, and the single-series form is a thin wrapper around it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

__all__ = [
    "STATISTICS",
    "QUANTILES",
    "FeatureVector",
    "summary_stats",
    "summary_stats_batch",
    "summary_names",
    "interval_features",
    "interval_features_batch",
]

# declaration order; output columns always follow it
STATISTICS = (
    "mean",
    "std",
    "variance",
    "min",
    "max",
    "median",
    "skew",
    "kurtosis",
    "nb_unique",
    "count_above_mean",
    "count_below_mean",
)

QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    names: tuple

    def __post_init__(self):
        if len(self.values) != len(self.names):
            raise ValueError("values and names must be parallel")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values.tolist()))


def _normalize_request(stat_set, quantiles):
    stat_set = set(stat_set)
    unknown = stat_set - set(STATISTICS)
    if unknown:
        raise ValueError(f"unknown statistics {sorted(unknown)}; choose from {STATISTICS}")
    qs = sorted(set(float(q) for q in quantiles))
    for q in qs:
        if q not in QUANTILES:
            raise ValueError(f"quantile {q} not among {QUANTILES}")
    stats = [s for s in STATISTICS if s in stat_set]
    if not stats and not qs:
        raise ValueError("at least one statistic or quantile must be requested")
    return stats, qs


def summary_names(stat_set, quantiles=()) -> tuple:
    stats, qs = _normalize_request(stat_set, quantiles)
    return tuple(stats) + tuple(f"q{q:g}" for q in qs)


def summary_stats_batch(X, stat_set, quantiles=()) -> np.ndarray:
    """Row-wise summary statistics, one column per requested feature.

    Parameters
    ----------
    X : array of shape (n_series, m), m >= 2
    stat_set : iterable of names from ``STATISTICS``
    quantiles : iterable of levels from ``QUANTILES``

    Returns
    -------
    ndarray of shape (n_series, n_features)
        Columns follow ``summary_names(stat_set, quantiles)``.

    Notes
    -----
    ``std`` and ``variance`` use the unbiased (n - 1) denominator. ``skew`` and
    ``kurtosis`` are the moment estimators g1 and g2 (kurtosis in excess form),
    both set to 0 for constant series.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-d array of series")
    if X.shape[1] < 2:
        raise ValueError("summary statistics need series of length >= 2")
    stats, qs = _normalize_request(stat_set, quantiles)
    n, m = X.shape
    mean = X.mean(axis=1)
    dev = X - mean[:, None]
    constant = np.ptp(X, axis=1) == 0
    m2 = np.where(constant, 0.0, np.mean(dev**2, axis=1))
    # shape statistics are scale free; rescaling avoids under/overflow of the moments
    scale = np.max(np.abs(dev), axis=1)
    z = dev / np.where(constant | (scale == 0), 1.0, scale)[:, None]
    z2 = np.mean(z**2, axis=1)
    safe = np.where(constant | (z2 == 0), 1.0, z2)

    cols = []
    for s in stats:
        if s == "mean":
            cols.append(mean)
        elif s == "std":
            cols.append(np.sqrt(m2 * m / (m - 1)))
        elif s == "variance":
            cols.append(m2 * m / (m - 1))
        elif s == "min":
            cols.append(X.min(axis=1))
        elif s == "max":
            cols.append(X.max(axis=1))
        elif s == "median":
            cols.append(np.median(X, axis=1))
        elif s == "skew":
            cols.append(np.where(constant, 0.0, np.mean(z**3, axis=1) / safe**1.5))
        elif s == "kurtosis":
            cols.append(np.where(constant, 0.0, np.mean(z**4, axis=1) / safe**2 - 3.0))
        elif s == "nb_unique":
            S = np.sort(X, axis=1)
            cols.append(1.0 + np.count_nonzero(np.diff(S, axis=1), axis=1))
        elif s == "count_above_mean":
            cols.append(np.count_nonzero(X > mean[:, None], axis=1).astype(np.float64))
        elif s == "count_below_mean":
            cols.append(np.count_nonzero(X < mean[:, None], axis=1).astype(np.float64))
    if qs:
        Q = np.quantile(X, qs, axis=1, method="linear")
        cols.extend(Q)
    out = np.column_stack(cols) if cols else np.empty((n, 0))
    return out.reshape(n, len(stats) + len(qs))


def summary_stats(series, stat_set, quantiles=()) -> FeatureVector:
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1:
        raise ValueError("expected a 1-d series")
    values = summary_stats_batch(series[None, :], stat_set, quantiles)[0]
    return FeatureVector(values, summary_names(stat_set, quantiles))


def _check_interval(m, start, length):
    if length < 3:
        raise ValueError(f"interval length must be >= 3, got {length}")
    if start < 0 or start + length > m:
        raise ValueError(f"interval [{start}, {start + length}) outside series of length {m}")


@nb.njit(cache=True)
def _interval_kernel(X, starts, lengths, out):
    n = X.shape[0]
    for k in range(starts.shape[0]):
        s, L = starts[k], lengths[k]
        tc = (L - 1) / 2.0
        tt = 0.0
        for j in range(L):
            tt += (j - tc) * (j - tc)
        for i in range(n):
            lo = X[i, s]
            hi = lo
            acc = 0.0
            for j in range(s, s + L):
                v = X[i, j]
                acc += v
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
            mu = acc / L
            out[i, 3 * k] = mu
            if lo == hi:
                out[i, 3 * k + 1] = 0.0
                out[i, 3 * k + 2] = 0.0
                continue
            ss = 0.0
            st = 0.0
            for j in range(L):
                d = X[i, s + j] - mu
                ss += d * d
                st += d * (j - tc)
            out[i, 3 * k + 1] = np.sqrt(ss / (L - 1))
            out[i, 3 * k + 2] = st / tt


def interval_features_batch(X, starts, lengths) -> np.ndarray:
    """Mean, standard deviation and slope of each interval for every row.

    Returns an array of shape (n_series, 3 * n_intervals) laid out as
    ``[mean_0, std_0, slope_0, mean_1, ...]``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-d array of series")
    starts = np.asarray(starts, dtype=np.int64).ravel()
    lengths = np.asarray(lengths, dtype=np.int64).ravel()
    if starts.shape != lengths.shape:
        raise ValueError("starts and lengths must be parallel")
    for s, L in zip(starts.tolist(), lengths.tolist()):
        _check_interval(X.shape[1], s, L)
    out = np.empty((X.shape[0], 3 * starts.shape[0]))
    _interval_kernel(X, starts, lengths, out)
    return out


def interval_features(series, start: int, length: int) -> tuple[float, float, float]:
    """(mean, sample std, least-squares slope) of ``series[start:start + length]``."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1:
        raise ValueError("expected a 1-d series")
    _check_interval(series.shape[0], int(start), int(length))
    f = interval_features_batch(series[None, :], [start], [length])[0]
    return float(f[0]), float(f[1]), float(f[2])
