import functools
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from probesel.primitives.distances import (
    dtw_distance,
    euclidean_distance,
    pairwise_distances,
    twe_distance,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
series = arrays(np.float64, st.integers(1, 12), elements=finite)


def _paths(n, m):
    """Every monotone warping path from (0, 0) to (n - 1, m - 1)."""
    def walk(i, j):
        if (i, j) == (n - 1, m - 1):
            yield [(i, j)]
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            a, b = i + di, j + dj
            if a < n and b < m:
                for rest in walk(a, b):
                    yield [(i, j)] + rest
    return list(walk(0, 0))


def dtw_brute_force(a, b):
    return min(sum((a[i] - b[j]) ** 2 for i, j in p) for p in _paths(len(a), len(b)))


def twe_reference(a, b, nu, lam):
    """Memoised recursion over prefixes, with explicit timestamps."""
    x = [0.0] + list(map(float, a))
    y = [0.0] + list(map(float, b))
    tx = list(range(len(x)))
    ty = list(range(len(y)))

    @functools.lru_cache(maxsize=None)
    def D(i, j):
        if i == 0 and j == 0:
            return 0.0
        if i == 0 or j == 0:
            return float("inf")
        cost_match = (
            D(i - 1, j - 1)
            + abs(x[i] - y[j])
            + abs(x[i - 1] - y[j - 1])
            + nu * (abs(tx[i] - ty[j]) + abs(tx[i - 1] - ty[j - 1]))
        )
        cost_a = D(i - 1, j) + abs(x[i] - x[i - 1]) + nu * (tx[i] - tx[i - 1]) + lam
        cost_b = D(i, j - 1) + abs(y[j] - y[j - 1]) + nu * (ty[j] - ty[j - 1]) + lam
        return min(cost_match, cost_a, cost_b)

    return D(len(a), len(b))


def test_dtw_matches_path_enumeration():
    rng = np.random.default_rng(12345)
    for _ in range(250):
        n, m = rng.integers(1, 8, 2)
        a, b = rng.normal(size=n), rng.normal(size=m)
        assert dtw_distance(a, b) == pytest.approx(dtw_brute_force(a, b), abs=1e-9)


def test_dtw_examples():
    assert dtw_distance([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert dtw_distance([0, 1], [0, 1, 1]) == 0.0


def test_dtw_window_constrains_warping():
    a = np.array([0.0, 0.0, 0.0, 1.0])
    b = np.array([1.0, 0.0, 0.0, 0.0])
    assert dtw_distance(a, b, window=1.0) == pytest.approx(dtw_brute_force(a, b))
    # a band of radius 1 still allows the diagonal, and is at least the free warp
    assert dtw_distance(a, b, window=0.25) >= dtw_distance(a, b)
    with pytest.raises(ValueError):
        dtw_distance(a, b, window=0.0)


@given(series, series)
def test_distance_symmetry_and_sign(a, b):
    for d in (dtw_distance(a, b), twe_distance(a, b)):
        assert d >= 0
    assert dtw_distance(a, b) == pytest.approx(dtw_distance(b, a), rel=1e-12, abs=1e-9)
    assert twe_distance(a, b) == pytest.approx(twe_distance(b, a), rel=1e-12, abs=1e-9)


@given(st.integers(1, 12).flatmap(lambda n: st.tuples(
    arrays(np.float64, n, elements=finite), arrays(np.float64, n, elements=finite))))
def test_dtw_bounded_by_diagonal_path(pair):
    a, b = pair
    assert dtw_distance(a, b) <= np.sum((a - b) ** 2) * (1 + 1e-12) + 1e-9
    assert euclidean_distance(a, b) == pytest.approx(euclidean_distance(b, a))


@given(series)
def test_identity_is_zero(a):
    assert dtw_distance(a, a) == 0.0
    assert twe_distance(a, a) == 0.0
    assert euclidean_distance(a, a) == 0.0


def test_twe_matches_independent_recursion():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n, m = rng.integers(1, 6, 2)
        a, b = rng.normal(size=n), rng.normal(size=m)
        nu, lam = rng.choice([0.0, 0.001, 0.5]), rng.choice([0.0, 1.0, 2.5])
        assert twe_distance(a, b, nu, lam) == pytest.approx(twe_reference(a, b, nu, lam), abs=1e-9)


def test_twe_single_elements():
    # 1x1 recurrence: only the match from the origin is finite,
    # |x - y| + |0 - 0| + nu * (|1 - 1| + |0 - 0|)
    assert twe_distance([3.0], [-1.5]) == pytest.approx(4.5)
    assert twe_distance([2.0], [2.0], nu=5.0, lmbda=9.0) == 0.0


def test_twe_rejects_negative_parameters():
    with pytest.raises(ValueError):
        twe_distance([1.0], [2.0], nu=-0.1)
    with pytest.raises(ValueError):
        twe_distance([1.0], [2.0], lmbda=-1.0)


def test_empty_input_rejected():
    for fn in (dtw_distance, twe_distance, euclidean_distance):
        with pytest.raises(ValueError):
            fn([], [1.0])


def test_euclidean_needs_equal_lengths():
    with pytest.raises(ValueError):
        euclidean_distance([1.0, 2.0], [1.0])


@pytest.mark.parametrize("metric", ["euclidean", "dtw", "twe"])
def test_pairwise_matches_scalar(metric):
    rng = np.random.default_rng(3)
    A, B = rng.normal(size=(4, 6)), rng.normal(size=(3, 6))
    D = pairwise_distances(A, B, metric)
    fn = {"euclidean": euclidean_distance, "dtw": dtw_distance, "twe": twe_distance}[metric]
    for i, j in itertools.product(range(4), range(3)):
        assert D[i, j] == pytest.approx(fn(A[i], B[j]), rel=1e-12)


def test_pairwise_euclidean_large_offsets_exact():
    A = np.full((1, 5), 1e8)
    B = A + np.array([[0.0, 0.0, 0.0, 0.0, 1.0]])
    assert pairwise_distances(A, B)[0, 0] == 1.0


def test_pairwise_unknown_metric():
    with pytest.raises(ValueError):
        pairwise_distances(np.zeros((1, 2)), np.zeros((1, 2)), "manhattan")
