import json

import numpy as np
import pytest

from probesel.primitives.tree import (
    DecisionTree,
    RandomForest,
    fit_tree,
    forest_from_json,
    forest_to_json,
    predict_tree,
)


def two_moons(n, noise, seed):
    rng = np.random.default_rng(seed)
    t = rng.uniform(0, np.pi, n)
    y = rng.integers(0, 2, n)
    x0 = np.where(y == 0, np.cos(t), 1 - np.cos(t))
    x1 = np.where(y == 0, np.sin(t), 0.5 - np.sin(t))
    X = np.column_stack([x0, x1]) + rng.normal(scale=noise, size=(n, 2))
    return X, y


def _check_structure(tree: DecisionTree, X, w=None):
    """Thresholds lie in the training range; leaf counts sum to routed samples."""
    w = np.ones(len(X)) if w is None else w
    internal = tree.feature >= 0
    for node in np.flatnonzero(internal):
        f = tree.feature[node]
        assert X[:, f].min() <= tree.threshold[node] <= X[:, f].max()
    leaves = tree.apply(X)
    for leaf in np.unique(leaves):
        assert tree.value[leaf].sum() == pytest.approx(w[leaves == leaf].sum())


def test_separable_single_feature():
    X = np.array([[0.1], [0.4], [0.5], [2.0], [2.2], [3.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    tree = fit_tree(X, y)
    assert tree.depth == 1
    assert np.array_equal(tree.predict(X), y)
    assert tree.threshold[0] == pytest.approx(1.25)


def test_single_class_is_a_leaf():
    X = np.random.default_rng(0).normal(size=(20, 3))
    tree = fit_tree(X, np.zeros(20, dtype=int))
    assert tree.n_nodes == 1
    assert predict_tree(tree, [100.0, -5.0, 0.0]) == 0


def test_empty_training_set():
    with pytest.raises(ValueError):
        fit_tree(np.empty((0, 2)), np.empty(0, dtype=int))


def test_structure_invariants_and_determinism():
    X, y = two_moons(300, 0.3, 1)
    a = fit_tree(X, y, feature_subsample=1, seed=4)
    b = fit_tree(X, y, feature_subsample=1, seed=4)
    assert np.array_equal(a.threshold, b.threshold) and np.array_equal(a.feature, b.feature)
    _check_structure(a, X)


def test_weighted_leaf_counts():
    X, y = two_moons(100, 0.2, 2)
    w = np.random.default_rng(3).integers(0, 3, 100)
    tree = fit_tree(X, y, sample_weight=w)
    _check_structure(tree, X[w > 0], w[w > 0].astype(float))


def test_tie_break_prefers_lower_feature():
    # features 0 and 1 are identical, so both give the same best split
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    tree = fit_tree(X, np.array([0, 0, 1, 1]))
    assert tree.feature[0] == 0


def test_max_depth_and_min_leaf():
    X, y = two_moons(200, 0.4, 5)
    assert fit_tree(X, y, max_depth=2).depth <= 2
    tree = fit_tree(X, y, min_leaf=10)
    leaves = tree.feature < 0
    assert tree.value[leaves].sum(axis=1).min() >= 10


def test_forest_two_moons_oob():
    X, y = two_moons(400, 0.15, 0)
    forest = RandomForest(n_estimators=100, seed=11).fit(X, y)
    assert forest.oob_score(X, y) > 0.9


def test_forest_reproducible_and_serializable():
    X, y = two_moons(150, 0.25, 9)
    f1 = RandomForest(n_estimators=30, seed=3).fit(X, y)
    f2 = RandomForest(n_estimators=30, seed=3).fit(X, y)
    probe = np.random.default_rng(1).uniform(-1.5, 2.5, size=(200, 2))
    assert np.array_equal(f1.vote_fractions(probe), f2.vote_fractions(probe))
    text = forest_to_json(f1)
    assert json.loads(text)["version"] == 1
    f3 = forest_from_json(text)
    assert np.array_equal(f3.tree_predictions(probe), f1.tree_predictions(probe))


def test_forest_json_rejects_other_documents():
    with pytest.raises(ValueError):
        forest_from_json(json.dumps({"format": "something-else"}))
