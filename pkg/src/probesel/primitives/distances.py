"""Elastic and lock-step distances between univariate time series."""

from __future__ import annotations

import math

import numba as nb
import numpy as np

__all__ = [
    "euclidean_distance",
    "dtw_distance",
    "twe_distance",
    "pairwise_distances",
    "DISTANCES",
]


@nb.njit(cache=True)
def _dtw(a, b, radius):
    n, m = a.shape[0], b.shape[0]
    prev = np.full(m + 1, np.inf)
    cur = np.full(m + 1, np.inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur[:] = np.inf
        lo = max(1, i - radius)
        hi = min(m, i + radius)
        for j in range(lo, hi + 1):
            d = a[i - 1] - b[j - 1]
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = d * d + best
        prev, cur = cur, prev
    return prev[m]


@nb.njit(cache=True)
def _twe(a, b, nu, lam):
    n, m = a.shape[0], b.shape[0]
    # series are padded with a leading 0 at timestamp 0
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        ai = a[i - 1]
        ap = a[i - 2] if i > 1 else 0.0
        for j in range(1, m + 1):
            bj = b[j - 1]
            bp = b[j - 2] if j > 1 else 0.0
            match = (
                D[i - 1, j - 1]
                + abs(ai - bj)
                + abs(ap - bp)
                + nu * (abs(i - j) + abs((i - 1) - (j - 1)))
            )
            del_a = D[i - 1, j] + abs(ai - ap) + nu + lam
            del_b = D[i, j - 1] + abs(bj - bp) + nu + lam
            best = match
            if del_a < best:
                best = del_a
            if del_b < best:
                best = del_b
            D[i, j] = best
    return D[n, m]


def _as_series(x, name):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty 1-d series")
    return x


def _radius(window, n, m):
    if window is None:
        return max(n, m)
    if not 0.0 < window <= 1.0:
        raise ValueError("window must be a fraction in (0, 1]")
    # the band must at least reach the corner cell for unequal lengths
    return max(int(math.ceil(window * max(n, m))), abs(n - m))


def euclidean_distance(a, b) -> float:
    a, b = _as_series(a, "a"), _as_series(b, "b")
    if a.shape != b.shape:
        raise ValueError("euclidean distance needs equal-length series")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def dtw_distance(a, b, window: float | None = None) -> float:
    """Dynamic time warping cost with squared pointwise differences.

    ``window`` is a Sakoe-Chiba band given as a fraction of the longer series;
    ``None`` leaves the warping unconstrained.
    """
    a, b = _as_series(a, "a"), _as_series(b, "b")
    return float(_dtw(a, b, _radius(window, a.shape[0], b.shape[0])))


def twe_distance(a, b, nu: float = 0.001, lmbda: float = 1.0) -> float:
    """Time warp edit distance with implicit integer timestamps.

    ``nu`` is the stiffness applied to timestamp gaps and ``lmbda`` the
    constant penalty of a delete operation.
    """
    if nu < 0 or lmbda < 0:
        raise ValueError("nu and lambda must be non-negative")
    a, b = _as_series(a, "a"), _as_series(b, "b")
    return float(_twe(a, b, float(nu), float(lmbda)))


@nb.njit(cache=True)
def _pairwise_dtw(A, B, radius):
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            out[i, j] = _dtw(A[i], B[j], radius)
    return out


@nb.njit(cache=True)
def _pairwise_twe(A, B, nu, lam):
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            out[i, j] = _twe(A[i], B[j], nu, lam)
    return out


def pairwise_distances(A, B, metric: str = "euclidean", **params) -> np.ndarray:
    """Distance matrix between the rows of ``A`` and the rows of ``B``."""
    A = np.ascontiguousarray(np.atleast_2d(A), dtype=np.float64)
    B = np.ascontiguousarray(np.atleast_2d(B), dtype=np.float64)
    if metric == "euclidean":
        if A.shape[1] != B.shape[1]:
            raise ValueError("euclidean distance needs equal-length series")
        out = np.empty((A.shape[0], B.shape[0]))
        for i, a in enumerate(A):
            out[i] = np.sqrt(np.sum((B - a) ** 2, axis=1))
        return out
    if metric == "dtw":
        radius = _radius(params.get("window"), A.shape[1], B.shape[1])
        return _pairwise_dtw(A, B, radius)
    if metric == "twe":
        nu, lam = float(params.get("nu", 0.001)), float(params.get("lmbda", 1.0))
        if nu < 0 or lam < 0:
            raise ValueError("nu and lambda must be non-negative")
        return _pairwise_twe(A, B, nu, lam)
    raise ValueError(f"unknown metric {metric!r}; choose from {sorted(DISTANCES)}")


DISTANCES = {
    "euclidean": euclidean_distance,
    "dtw": dtw_distance,
    "twe": twe_distance,
}
