"""Algorithm-selection classifiers behind one fit/predict contract.

A :class:`ClassifierSpec` is a pure parameter record; :func:`fit` turns it
into an immutable :class:`TrainedModel`. Labels are arbitrary strings and are
encoded internally by their sorted order, which also fixes every tie-break
that falls back to "class order".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .primitives.distances import pairwise_distances
from .primitives.features import (
    QUANTILES,
    STATISTICS,
    interval_features_batch,
    summary_stats_batch,
)
from .primitives.tree import DecisionTree, RandomForest, fit_tree, tree_seeds
from .trajectories import Dataset

__all__ = [
    "ClassifierKind",
    "ClassifierSpec",
    "TrainedModel",
    "fit",
    "fit_arrays",
    "predict",
    "predict_batch",
    "vote_fractions",
    "default_spec",
    "tuned_spec",
    "PRESETS",
    "preset",
    "model_to_json",
    "model_from_json",
    "MODEL_FORMAT_VERSION",
]

MODEL_FORMAT_VERSION = 1


class ClassifierKind(str, Enum):
    DUMMY = "Dummy"
    KNN = "KNN"
    SUMMARY = "Summary"
    TSF = "TSF"
    ROTATION_FOREST = "RotationForest"

    def __str__(self) -> str:
        return self.value


KNN_WEIGHTS = ("uniform", "distance")
KNN_DISTANCES = ("euclidean", "dtw", "twe")

# "count statistics" is read as the two mean-crossing counts
COUNT_STATISTICS = ("count_above_mean", "count_below_mean")

_DEFAULTS = {
    ClassifierKind.DUMMY: {},
    ClassifierKind.KNN: {
        "n_neighbors": 1,
        "weights": "uniform",
        "distance": "euclidean",
        "window": None,
        "nu": 0.001,
        "lmbda": 1.0,
    },
    ClassifierKind.SUMMARY: {
        "stats": ["mean", "std", "min", "max"],
        "quantiles": [0.25, 0.5, 0.75],
        "n_estimators": 200,
    },
    ClassifierKind.TSF: {"n_estimators": 200, "min_interval": 3},
    ClassifierKind.ROTATION_FOREST: {
        "n_estimators": 200,
        "min_group": 3,
        "max_group": 3,
        "remove_proportion": 0.5,
    },
}

_TUNED = {
    ClassifierKind.DUMMY: {},
    ClassifierKind.KNN: {"n_neighbors": 4, "weights": "uniform", "distance": "twe"},
    ClassifierKind.SUMMARY: {
        "stats": ["mean", "min", "max", "kurtosis", "variance", "nb_unique", *COUNT_STATISTICS],
        "quantiles": [0.25],
    },
    ClassifierKind.TSF: {"n_estimators": 460, "min_interval": 3},
    ClassifierKind.ROTATION_FOREST: {
        "n_estimators": 367,
        "min_group": 10,
        "max_group": 19,
        "remove_proportion": 0.2364,
    },
}


def _int_in(name, v, lo, hi):
    if isinstance(v, bool) or int(v) != v or not lo <= v <= hi:
        raise ValueError(f"{name} must be an integer in [{lo}, {hi}], got {v!r}")
    return int(v)


def _validate(kind: ClassifierKind, p: dict) -> dict:
    unknown = set(p) - set(_DEFAULTS[kind])
    if unknown:
        raise ValueError(f"unknown {kind} parameters: {sorted(unknown)}")
    p = {**_DEFAULTS[kind], **p}
    if kind is ClassifierKind.KNN:
        p["n_neighbors"] = _int_in("n_neighbors", p["n_neighbors"], 1, 30)
        if p["weights"] not in KNN_WEIGHTS:
            raise ValueError(f"weights must be one of {KNN_WEIGHTS}")
        if p["distance"] not in KNN_DISTANCES:
            raise ValueError(f"distance must be one of {KNN_DISTANCES}")
        if p["window"] is not None and not 0.0 < float(p["window"]) <= 1.0:
            raise ValueError("window must lie in (0, 1]")
        if p["nu"] < 0 or p["lmbda"] < 0:
            raise ValueError("nu and lmbda must be non-negative")
    elif kind is ClassifierKind.SUMMARY:
        stats = [s for s in STATISTICS if s in set(p["stats"])]
        if len(stats) != len(set(p["stats"])):
            raise ValueError(f"unknown statistics in {p['stats']}")
        qs = sorted(set(float(q) for q in p["quantiles"]))
        if any(q not in QUANTILES for q in qs):
            raise ValueError(f"quantiles must be drawn from {QUANTILES}")
        if not stats:
            raise ValueError("Summary needs a non-empty statistic set")
        p["stats"], p["quantiles"] = stats, qs
        p["n_estimators"] = _int_in("n_estimators", p["n_estimators"], 1, 5000)
    elif kind is ClassifierKind.TSF:
        p["n_estimators"] = _int_in("n_estimators", p["n_estimators"], 10, 500)
        p["min_interval"] = _int_in("min_interval", p["min_interval"], 3, 30)
    elif kind is ClassifierKind.ROTATION_FOREST:
        p["n_estimators"] = _int_in("n_estimators", p["n_estimators"], 10, 500)
        p["min_group"] = _int_in("min_group", p["min_group"], 3, 30)
        p["max_group"] = _int_in("max_group", p["max_group"], 3, 30)
        if p["min_group"] > p["max_group"]:
            raise ValueError("min_group must not exceed max_group")
        if not 0.0 < float(p["remove_proportion"]) < 1.0:
            raise ValueError("remove_proportion must lie in (0, 1)")
        p["remove_proportion"] = float(p["remove_proportion"])
    return p


@dataclass(frozen=True)
class ClassifierSpec:
    """Kind, parameters and seed of a classifier; holds no fitted state."""

    kind: ClassifierKind
    params: dict = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ClassifierKind(self.kind))
        object.__setattr__(self, "params", _validate(self.kind, dict(self.params)))

    def with_seed(self, seed: int) -> "ClassifierSpec":
        return ClassifierSpec(self.kind, self.params, int(seed))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "params": dict(self.params), "rng_seed": self.rng_seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierSpec":
        return cls(d["kind"], d.get("params", {}), int(d.get("rng_seed", 0)))


def default_spec(kind, seed: int = 0) -> ClassifierSpec:
    return ClassifierSpec(kind, {}, seed)


def tuned_spec(kind, seed: int = 0, count_stats=COUNT_STATISTICS) -> ClassifierSpec:
    """The shipped tuned parameters for ``kind``.

    ``count_stats`` replaces the two mean-crossing counts in the tuned
    Summary statistic set, for trying another reading of "count statistics".
    """
    kind = ClassifierKind(kind)
    params = dict(_TUNED[kind])
    if kind is ClassifierKind.SUMMARY:
        base = [s for s in params["stats"] if s not in COUNT_STATISTICS]
        params["stats"] = base + list(count_stats)
    return ClassifierSpec(kind, params, seed)


PRESETS = {
    "Dummy": (ClassifierKind.DUMMY, "default"),
    "KNN": (ClassifierKind.KNN, "default"),
    "KNN-tuned": (ClassifierKind.KNN, "tuned"),
    "Summary": (ClassifierKind.SUMMARY, "default"),
    "Summary-tuned": (ClassifierKind.SUMMARY, "tuned"),
    "TSF": (ClassifierKind.TSF, "default"),
    "TSF-tuned": (ClassifierKind.TSF, "tuned"),
    "RotationForest": (ClassifierKind.ROTATION_FOREST, "default"),
    "RotationForest-tuned": (ClassifierKind.ROTATION_FOREST, "tuned"),
}


def preset(name: str, seed: int = 0) -> ClassifierSpec:
    try:
        kind, flavour = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return tuned_spec(kind, seed) if flavour == "tuned" else default_spec(kind, seed)


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A fitted classifier.

    ``state`` is kind specific and treated as read-only; ``fingerprint`` is
    the hash of the training rows only.
    """

    spec: ClassifierSpec
    classes: tuple
    series_length: int
    fingerprint: str
    state: dict = field(repr=False)

    @property
    def kind(self) -> ClassifierKind:
        return self.spec.kind

    @property
    def fixed_width(self) -> bool:
        return not (
            self.kind is ClassifierKind.DUMMY
            or (self.kind is ClassifierKind.KNN and self.spec.params["distance"] != "euclidean")
        )


def _as_matrix(series) -> np.ndarray:
    if isinstance(series, np.ndarray) and series.ndim == 2:
        return np.asarray(series, dtype=np.float64)
    rows = [np.asarray(s, dtype=np.float64).ravel() for s in series]
    if not rows:
        return np.empty((0, 0))
    if len({r.shape[0] for r in rows}) != 1:
        raise ValueError("ragged series lengths; all series must have equal length")
    return np.stack(rows)


def fit(spec: ClassifierSpec, train: Dataset) -> TrainedModel:
    """Fit ``spec`` on every row of ``train``."""
    return fit_arrays(spec, train.series, train.labels, fingerprint=train.fingerprint())


def fit_arrays(spec: ClassifierSpec, X, labels, fingerprint: str = "") -> TrainedModel:
    X = _as_matrix(X)
    labels = np.asarray(labels, dtype=object)
    if X.shape[0] == 0:
        raise ValueError("cannot fit on an empty training set")
    if labels.shape != (X.shape[0],):
        raise ValueError("one label per training series is required")
    if not np.all(np.isfinite(X)):
        raise ValueError("training series must be finite")
    classes = tuple(sorted(set(labels.tolist())))
    y = np.searchsorted(np.array(classes, dtype=object), labels).astype(np.int64)
    state = _FITTERS[spec.kind](spec, X, y, len(classes))
    return TrainedModel(spec, classes, X.shape[1], fingerprint, state)


def _fit_dummy(spec, X, y, k):
    return {"mode": int(np.argmax(np.bincount(y, minlength=k)))}


def _fit_knn(spec, X, y, k):
    return {"X": X.copy(), "y": y.copy()}


def _fit_summary(spec, X, y, k):
    p = spec.params
    F = summary_stats_batch(X, p["stats"], p["quantiles"])
    forest = RandomForest(n_estimators=p["n_estimators"], seed=spec.rng_seed).fit(F, y, k)
    return {"forest": forest}


def _tsf_intervals(rng, m, min_interval):
    n_int = max(1, math.isqrt(m))
    starts = rng.integers(0, m - min_interval + 1, n_int)
    lengths = np.array([rng.integers(min_interval, m - s + 1) for s in starts])
    return starts, lengths


def _fit_tsf(spec, X, y, k):
    p = spec.params
    m = X.shape[1]
    if p["min_interval"] > m:
        raise ValueError(
            f"TSF min_interval={p['min_interval']} exceeds the series length {m}; "
            f"choose min_interval <= {m} for this trajectory type"
        )
    trees = []
    for s in tree_seeds(spec.rng_seed, p["n_estimators"]):
        rng = np.random.default_rng(s)
        starts, lengths = _tsf_intervals(rng, m, p["min_interval"])
        F = interval_features_batch(X, starts, lengths)
        tree = fit_tree(F, y, k, seed=int(rng.integers(0, 2**32)))
        trees.append((starts, lengths, tree))
    return {"trees": trees}


def _rotf_groups(rng, n_atts, lo, hi):
    perm = rng.permutation(n_atts)
    groups, pos = [], 0
    while pos < n_atts:
        size = min(int(rng.integers(lo, hi + 1)), n_atts)
        g = perm[pos : pos + size]
        if g.shape[0] < size:
            # top up the last group with attributes drawn from the other groups
            rest = np.setdiff1d(perm, g)
            g = np.concatenate([g, rng.choice(rest, size - g.shape[0], replace=False)])
        groups.append(np.sort(g))
        pos += size
    return groups


def _fit_rotf(spec, X, y, k):
    p = spec.params
    keep = np.flatnonzero(np.ptp(X, axis=0) > 0)
    if keep.size == 0:
        keep = np.arange(X.shape[1])
    Z = X[:, keep]
    mu = Z.mean(axis=0)
    sd = Z.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (Z - mu) / sd
    trees = []
    for s in tree_seeds(spec.rng_seed, p["n_estimators"]):
        rng = np.random.default_rng(s)
        groups = _rotf_groups(rng, Z.shape[1], p["min_group"], p["max_group"])
        rotations = []
        for g in groups:
            rows = _rotf_sample(rng, y, k, p["remove_proportion"])
            sub = Z[np.ix_(rows, g)]
            center = sub.mean(axis=0)
            cov = (sub - center).T @ (sub - center)
            evals, evecs = np.linalg.eigh(cov)
            Q = evecs[:, np.argsort(-evals, kind="stable")]
            rotations.append((g, center, Q))
        R = _rotate(Z, rotations)
        tree = fit_tree(R, y, k, seed=int(rng.integers(0, 2**32)))
        trees.append((rotations, tree))
    return {"keep": keep, "mu": mu, "sd": sd, "trees": trees}


def _rotf_sample(rng, y, k, remove):
    present = np.unique(y)
    n_cls = int(rng.integers(1, present.shape[0] + 1))
    chosen = rng.choice(present, n_cls, replace=False)
    cand = np.flatnonzero(np.isin(y, chosen))
    n_keep = max(2, int(math.ceil((1.0 - remove) * cand.shape[0])))
    n_keep = min(n_keep, cand.shape[0])
    return np.sort(rng.choice(cand, n_keep, replace=False))


def _rotate(Z, rotations):
    return np.hstack([(Z[:, g] - c) @ Q for g, c, Q in rotations])


_FITTERS = {
    ClassifierKind.DUMMY: _fit_dummy,
    ClassifierKind.KNN: _fit_knn,
    ClassifierKind.SUMMARY: _fit_summary,
    ClassifierKind.TSF: _fit_tsf,
    ClassifierKind.ROTATION_FOREST: _fit_rotf,
}


# ---------------------------------------------------------------------------


def _check_width(model, X):
    if model.fixed_width and X.shape[0] and X.shape[1] != model.series_length:
        raise ValueError(
            f"{model.kind} model was trained on series of length {model.series_length}, "
            f"got length {X.shape[1]}"
        )
    if X.shape[0] and not np.all(np.isfinite(X)):
        raise ValueError("series must be finite")


def _knn_indices(model, X):
    p = model.spec.params
    Xtr, ytr = model.state["X"], model.state["y"]
    params = {"window": p["window"]} if p["distance"] == "dtw" else {}
    if p["distance"] == "twe":
        params = {"nu": p["nu"], "lmbda": p["lmbda"]}
    D = pairwise_distances(X, Xtr, p["distance"], **params)
    k = min(p["n_neighbors"], Xtr.shape[0])
    n_cls = len(model.classes)
    out = np.empty((X.shape[0], n_cls))
    order = np.argsort(D, axis=1, kind="stable")[:, :k]
    for i in range(X.shape[0]):
        nn = order[i]
        d = D[i, nn]
        lab = ytr[nn]
        if p["weights"] == "uniform":
            w = np.ones(k)
        elif np.any(d == 0):
            w = (d == 0).astype(np.float64)
        else:
            w = 1.0 / d
        out[i] = np.bincount(lab, weights=w, minlength=n_cls)
    return out, order, D


def _knn_predict(model, X):
    votes, order, D = _knn_indices(model, X)
    ytr = model.state["y"]
    pred = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        top = np.flatnonzero(votes[i] == votes[i].max())
        if top.shape[0] == 1:
            pred[i] = top[0]
            continue
        nn = order[i]
        # mean distance of each tied class's neighbours; class order breaks what is left
        mean_d = [np.mean(D[i, nn[ytr[nn] == c]]) for c in top]
        pred[i] = top[int(np.argmin(mean_d))]
    return pred


def _tsf_votes(model, X):
    votes = np.zeros((X.shape[0], len(model.classes)))
    rows = np.arange(X.shape[0])
    for starts, lengths, tree in model.state["trees"]:
        votes[rows, tree.predict(interval_features_batch(X, starts, lengths))] += 1
    return votes


def _rotf_votes(model, X):
    st = model.state
    Z = (X[:, st["keep"]] - st["mu"]) / st["sd"]
    votes = np.zeros((X.shape[0], len(model.classes)))
    rows = np.arange(X.shape[0])
    for rotations, tree in st["trees"]:
        votes[rows, tree.predict(_rotate(Z, rotations))] += 1
    return votes


def _summary_votes(model, X):
    p = model.spec.params
    F = summary_stats_batch(X, p["stats"], p["quantiles"])
    return model.state["forest"].vote_fractions(F)


_VOTERS = {
    ClassifierKind.SUMMARY: _summary_votes,
    ClassifierKind.TSF: _tsf_votes,
    ClassifierKind.ROTATION_FOREST: _rotf_votes,
}


def _predict_indices(model, X):
    if model.kind is ClassifierKind.DUMMY:
        return np.full(X.shape[0], model.state["mode"], dtype=np.int64)
    if model.kind is ClassifierKind.KNN:
        return _knn_predict(model, X)
    return np.argmax(_VOTERS[model.kind](model, X), axis=1)


def _batch_matrix(data):
    if isinstance(data, Dataset):
        return data.series
    if isinstance(data, np.ndarray) and data.ndim == 2:
        return np.asarray(data, dtype=np.float64)
    data = list(data)
    if not data:
        return np.empty((0, 0))
    return _as_matrix(data)


def predict_batch(model: TrainedModel, data) -> np.ndarray:
    """Labels for every series in ``data`` (a Dataset, a matrix or a list)."""
    X = _batch_matrix(data)
    if X.shape[0] == 0:
        return np.empty(0, dtype=object)
    _check_width(model, X)
    idx = _predict_indices(model, X)
    return np.array(model.classes, dtype=object)[idx]


def predict(model: TrainedModel, series):
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1 or series.shape[0] == 0:
        raise ValueError("expected a non-empty 1-d series")
    return predict_batch(model, series[None, :])[0]


def vote_fractions(model: TrainedModel, data) -> np.ndarray:
    """Per-class vote share of the ensemble models, shape (n, n_classes)."""
    if model.kind not in _VOTERS:
        raise ValueError(f"{model.kind} is not an ensemble model")
    X = _batch_matrix(data)
    _check_width(model, X)
    votes = _VOTERS[model.kind](model, X)
    return votes / votes.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------


def _state_to_json(model):
    st = model.state
    kind = model.kind
    if kind is ClassifierKind.DUMMY:
        return dict(st)
    if kind is ClassifierKind.KNN:
        return {"X": st["X"].tolist(), "y": st["y"].tolist()}
    if kind is ClassifierKind.SUMMARY:
        return {"forest": st["forest"].to_dict()}
    if kind is ClassifierKind.TSF:
        return {
            "trees": [
                {"starts": s.tolist(), "lengths": L.tolist(), "tree": t.to_dict()}
                for s, L, t in st["trees"]
            ]
        }
    return {
        "keep": st["keep"].tolist(),
        "mu": st["mu"].tolist(),
        "sd": st["sd"].tolist(),
        "trees": [
            {
                "groups": [g.tolist() for g, _, _ in rot],
                "centers": [c.tolist() for _, c, _ in rot],
                "rotations": [Q.tolist() for _, _, Q in rot],
                "tree": t.to_dict(),
            }
            for rot, t in st["trees"]
        ],
    }


def _state_from_json(kind, d):
    f64 = lambda v: np.asarray(v, dtype=np.float64)  # noqa: E731
    i64 = lambda v: np.asarray(v, dtype=np.int64)  # noqa: E731
    if kind is ClassifierKind.DUMMY:
        return {"mode": int(d["mode"])}
    if kind is ClassifierKind.KNN:
        return {"X": f64(d["X"]), "y": i64(d["y"])}
    if kind is ClassifierKind.SUMMARY:
        return {"forest": RandomForest.from_dict(d["forest"])}
    if kind is ClassifierKind.TSF:
        return {
            "trees": [
                (i64(t["starts"]), i64(t["lengths"]), DecisionTree.from_dict(t["tree"]))
                for t in d["trees"]
            ]
        }
    trees = []
    for t in d["trees"]:
        rot = [
            (i64(g), f64(c), f64(Q).reshape(len(g), len(g)))
            for g, c, Q in zip(t["groups"], t["centers"], t["rotations"])
        ]
        trees.append((rot, DecisionTree.from_dict(t["tree"])))
    return {"keep": i64(d["keep"]), "mu": f64(d["mu"]), "sd": f64(d["sd"]), "trees": trees}


def model_to_json(model: TrainedModel) -> str:
    return json.dumps(
        {
            "format": "probesel.model",
            "version": MODEL_FORMAT_VERSION,
            "spec": model.spec.to_dict(),
            "classes": list(model.classes),
            "series_length": model.series_length,
            "fingerprint": model.fingerprint,
            "state": _state_to_json(model),
        }
    )


def model_from_json(text: str) -> TrainedModel:
    d = json.loads(text)
    if d.get("format") != "probesel.model":
        raise ValueError("not a serialized model")
    if d.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('version')}")
    spec = ClassifierSpec.from_dict(d["spec"])
    return TrainedModel(
        spec,
        tuple(d["classes"]),
        int(d["series_length"]),
        d["fingerprint"],
        _state_from_json(spec.kind, d["state"]),
    )
