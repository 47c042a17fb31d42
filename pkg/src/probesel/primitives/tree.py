"""CART decision trees and random forests with Gini splitting.

The tree builder is a presorted CART implementation compiled with numba: every
feature column is sorted once at the root and node segments are stably
partitioned on each split, so growing a tree costs O(n * p) per level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numba as nb
import numpy as np

__all__ = [
    "DecisionTree",
    "RandomForest",
    "fit_tree",
    "predict_tree",
    "forest_from_json",
    "forest_to_json",
    "FOREST_FORMAT_VERSION",
]

FOREST_FORMAT_VERSION = 1

_TIE_EPS = 1e-10


@nb.njit(cache=True)
def _build_tree(XT, S, y, w, n_classes, max_features, min_leaf, max_depth, seed):
    np.random.seed(seed)
    p, n = XT.shape
    m = S.shape[1]

    cap = 2 * m + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left_child = np.full(cap, -1, np.int64)
    right_child = np.full(cap, -1, np.int64)
    value = np.zeros((cap, n_classes))

    stack_node = np.empty(cap, np.int64)
    stack_start = np.empty(cap, np.int64)
    stack_end = np.empty(cap, np.int64)
    stack_depth = np.empty(cap, np.int64)
    top = 0
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = m
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    goes_left = np.zeros(n, np.bool_)
    buf = np.empty(m, np.int64)
    perm = np.arange(p)
    total = np.zeros(n_classes)
    left = np.zeros(n_classes)

    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]

        total[:] = 0.0
        for i in range(start, end):
            s = S[0, i]
            total[y[s]] += w[s]
        value[node, :] = total
        w_node = 0.0
        n_nonzero = 0
        for c in range(n_classes):
            w_node += total[c]
            if total[c] > 0:
                n_nonzero += 1
        if n_nonzero <= 1 or (end - start) < 2 * min_leaf:
            continue
        if max_depth > 0 and depth >= max_depth:
            continue

        # partial Fisher-Yates: visit features in random order, stop once
        # max_features features have been inspected and a split exists
        for i in range(p):
            perm[i] = i
        best_imp = np.inf
        best_f = -1
        best_t = 0.0
        visited = 0
        for fi in range(p):
            r = fi + np.random.randint(0, p - fi)
            tmp = perm[fi]
            perm[fi] = perm[r]
            perm[r] = tmp
            f = perm[fi]
            visited += 1
            left[:] = 0.0
            w_left = 0.0
            cnt_left = 0
            for i in range(start, end - 1):
                s = S[f, i]
                left[y[s]] += w[s]
                w_left += w[s]
                cnt_left += 1
                if cnt_left < min_leaf or (end - start - cnt_left) < min_leaf:
                    continue
                a = XT[f, s]
                b = XT[f, S[f, i + 1]]
                if not b > a:
                    continue
                w_right = w_node - w_left
                sl = 0.0
                sr = 0.0
                for c in range(n_classes):
                    sl += left[c] * left[c]
                    rc = total[c] - left[c]
                    sr += rc * rc
                imp = (w_left - sl / w_left) + (w_right - sr / w_right)
                t = 0.5 * (a + b)
                if t >= b:
                    t = a
                if imp < best_imp - _TIE_EPS:
                    best_imp = imp
                    best_f = f
                    best_t = t
                elif imp <= best_imp + _TIE_EPS and (
                    f < best_f or (f == best_f and t < best_t)
                ):
                    best_imp = imp
                    best_f = f
                    best_t = t
            if visited >= max_features and best_f >= 0:
                break
        if best_f < 0:
            continue

        n_left = 0
        for i in range(start, end):
            s = S[best_f, i]
            gl = XT[best_f, s] <= best_t
            goes_left[s] = gl
            if gl:
                n_left += 1
        if n_left == 0 or n_left == end - start:
            continue

        for f in range(p):
            li = start
            ri = 0
            for i in range(start, end):
                s = S[f, i]
                if goes_left[s]:
                    S[f, li] = s
                    li += 1
                else:
                    buf[ri] = s
                    ri += 1
            for i in range(ri):
                S[f, li + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_t
        lc = n_nodes
        rc_ = n_nodes + 1
        n_nodes += 2
        left_child[node] = lc
        right_child[node] = rc_
        # right pushed first so the left subtree gets lower node ids
        stack_node[top] = rc_
        stack_start[top] = start + n_left
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = lc
        stack_start[top] = start
        stack_end[top] = start + n_left
        stack_depth[top] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left_child[:n_nodes].copy(),
        right_child[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@nb.njit(cache=True)
def _apply(feature, threshold, left_child, right_child, X):
    out = np.empty(X.shape[0], np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left_child[node]
            else:
                node = right_child[node]
        out[i] = node
    return out


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """A fitted binary tree over axis-aligned splits.

    Node arrays follow the usual flat layout: ``feature[i] == -1`` marks a leaf,
    ``value[i]`` holds the (weighted) class counts of training samples routed
    to node ``i``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int

    @property
    def n_classes(self) -> int:
        return self.value.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Return the leaf index reached by every row of ``X``."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"expected rows with {self.n_features} features, got shape {X.shape}"
            )
        return _apply(self.feature, self.threshold, self.left, self.right, X)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        leaves = self.value[self.apply(X)]
        return leaves / leaves.sum(axis=1, keepdims=True)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Class indices; ties go to the lowest class index."""
        return np.argmax(self.value[self.apply(X)], axis=1)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64).reshape(
                len(d["feature"]), -1
            ),
            n_features=int(d["n_features"]),
        )


def fit_tree(
    X,
    y,
    n_classes: int | None = None,
    *,
    max_depth: int | None = None,
    min_leaf: int = 1,
    feature_subsample: int | float | str | None = None,
    sample_weight=None,
    seed: int = 0,
) -> DecisionTree:
    """Grow a CART tree with Gini impurity and midpoint thresholds.

    Parameters
    ----------
    X : array of shape (n_samples, n_features)
    y : array of int class indices in ``[0, n_classes)``
    n_classes : int, optional
        Defaults to ``max(y) + 1``.
    max_depth : int or None
        ``None`` grows until leaves are pure.
    min_leaf : int
        Minimum number of samples in each child.
    feature_subsample : int, float, "sqrt", "log2" or None
        Number of features inspected per node. ``None`` inspects all of them.
    sample_weight : array of non-negative int-like weights, optional
        Bootstrap counts; zero-weight rows are excluded from the tree.
    seed : int
        Seeds feature sampling; the tree is a pure function of its inputs.

    Splits that tie on impurity are resolved by the lower feature index and
    then the lower threshold.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise ValueError("X must be two-dimensional")
    if X.shape[0] == 0:
        raise ValueError("cannot fit a tree on an empty training set")
    if y.shape != (X.shape[0],):
        raise ValueError("y must have one label per row of X")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    if y.min() < 0:
        raise ValueError("class indices must be non-negative")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    elif y.max() >= n_classes:
        raise ValueError("class index out of range for n_classes")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    w = (
        np.ones(X.shape[0])
        if sample_weight is None
        else np.ascontiguousarray(sample_weight, dtype=np.float64)
    )
    if w.shape != y.shape or np.any(w < 0) or not np.any(w > 0):
        raise ValueError("sample_weight must be non-negative with a positive entry")
    n_features = X.shape[1]
    mtry = _resolve_max_features(feature_subsample, n_features)
    active = np.flatnonzero(w > 0)
    order = np.argsort(X[active], axis=0, kind="stable")
    presorted = np.ascontiguousarray(active[order].T)
    feat, thr, lc, rc, val = _build_tree(
        np.ascontiguousarray(X.T),
        presorted,
        y,
        w,
        int(n_classes),
        mtry,
        int(min_leaf),
        0 if max_depth is None else int(max_depth),
        int(seed) % (2**32),
    )
    return DecisionTree(feat, thr, lc, rc, val, n_features)


def predict_tree(tree: DecisionTree, row) -> int:
    """Predict the class index of a single feature row."""
    row = np.asarray(row, dtype=np.float64)
    return int(tree.predict(row.reshape(1, -1))[0])


def _resolve_max_features(spec, n_features: int) -> int:
    if spec is None:
        return n_features
    if spec == "sqrt":
        return max(1, int(np.sqrt(n_features)))
    if spec == "log2":
        return max(1, int(np.log2(n_features)))
    if isinstance(spec, float):
        if not 0.0 < spec <= 1.0:
            raise ValueError("fractional feature_subsample must lie in (0, 1]")
        return max(1, int(spec * n_features))
    if isinstance(spec, (int, np.integer)):
        if spec < 1:
            raise ValueError("feature_subsample must be >= 1")
        return min(int(spec), n_features)
    raise ValueError(f"unsupported feature_subsample {spec!r}")


def tree_seeds(forest_seed: int, n_trees: int) -> list[int]:
    """Independent per-tree seeds derived from ``(forest_seed, tree_index)``."""
    return [
        int(np.random.SeedSequence([forest_seed, i]).generate_state(1)[0])
        for i in range(n_trees)
    ]


@dataclass(eq=False)
class RandomForest:
    """Bagged CART ensemble that predicts by majority vote.

    Parameters
    ----------
    n_estimators : int, default=200
    max_features : int, float, "sqrt", "log2" or None, default="sqrt"
    bootstrap : bool, default=True
    max_depth : int or None, default=None
    min_leaf : int, default=1
    seed : int, default=0
    """

    n_estimators: int = 200
    max_features: int | float | str | None = "sqrt"
    bootstrap: bool = True
    max_depth: int | None = None
    min_leaf: int = 1
    seed: int = 0
    trees: list[DecisionTree] = field(default_factory=list, repr=False)
    n_classes: int = 0
    seeds: list[int] = field(default_factory=list, repr=False)
    _in_bag: list[np.ndarray] = field(default_factory=list, repr=False)

    def fit(self, X, y, n_classes: int | None = None) -> "RandomForest":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("cannot fit a forest on an empty training set")
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        self.n_classes = int(y.max()) + 1 if n_classes is None else int(n_classes)
        self.seeds = tree_seeds(self.seed, self.n_estimators)
        self.trees = []
        self._in_bag = []
        n = X.shape[0]
        for s in self.seeds:
            weight = None
            if self.bootstrap:
                rng = np.random.default_rng(s)
                weight = np.bincount(rng.integers(0, n, n), minlength=n)
                self._in_bag.append(weight > 0)
            self.trees.append(
                fit_tree(
                    X,
                    y,
                    self.n_classes,
                    max_depth=self.max_depth,
                    min_leaf=self.min_leaf,
                    feature_subsample=self.max_features,
                    sample_weight=weight,
                    seed=s,
                )
            )
        return self

    def tree_predictions(self, X) -> np.ndarray:
        """Per-tree class predictions, shape (n_estimators, n_samples)."""
        if not self.trees:
            raise RuntimeError("forest is not fitted")
        return np.stack([t.predict(X) for t in self.trees])

    def vote_fractions(self, X) -> np.ndarray:
        votes = self.tree_predictions(X)
        counts = np.stack(
            [np.bincount(col, minlength=self.n_classes) for col in votes.T]
        )
        return counts / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.vote_fractions(X), axis=1)

    def oob_score(self, X, y) -> float:
        """Out-of-bag accuracy; requires ``bootstrap=True`` and the training data."""
        if not self._in_bag:
            raise RuntimeError("out-of-bag score needs a bootstrapped fitted forest")
        y = np.asarray(y)
        preds = self.tree_predictions(X)
        counts = np.zeros((X.shape[0], self.n_classes))
        for t, mask in enumerate(self._in_bag):
            oob = ~mask
            counts[oob, preds[t, oob]] += 1
        have = counts.sum(axis=1) > 0
        return float(np.mean(np.argmax(counts[have], axis=1) == y[have]))

    def to_dict(self) -> dict:
        return {
            "params": {
                "n_estimators": self.n_estimators,
                "max_features": self.max_features,
                "bootstrap": self.bootstrap,
                "max_depth": self.max_depth,
                "min_leaf": self.min_leaf,
                "seed": self.seed,
            },
            "n_classes": self.n_classes,
            "seeds": list(self.seeds),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        forest = cls(**d["params"])
        forest.n_classes = int(d["n_classes"])
        forest.seeds = [int(s) for s in d["seeds"]]
        forest.trees = [DecisionTree.from_dict(t) for t in d["trees"]]
        return forest


def forest_to_json(forest: RandomForest) -> str:
    return json.dumps({"format": "probesel.forest", "version": FOREST_FORMAT_VERSION,
                       **forest.to_dict()})


def forest_from_json(text: str) -> RandomForest:
    d = json.loads(text)
    if d.get("format") != "probesel.forest":
        raise ValueError("not a serialized forest")
    if d.get("version") != FOREST_FORMAT_VERSION:
        raise ValueError(f"unsupported forest format version {d.get('version')}")
    return RandomForest.from_dict(d)
