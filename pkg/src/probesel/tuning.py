"""Budgeted random search (and a grid driver) over classifier parameter spaces.

Candidates are scored by mean leave-one-instance-out accuracy. The log is
assembled by candidate index, so a run is reproducible whatever the order in
which a parallel mapper finishes the evaluations.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifiers import ClassifierKind, ClassifierSpec
from .evaluation import Protocol, make_splits, run_fold
from .primitives.features import QUANTILES, STATISTICS
from .seeds import derive_seed32
from .trajectories import Dataset

__all__ = [
    "IntRange",
    "FloatRange",
    "Choice",
    "Subsets",
    "ParameterSpace",
    "parameter_space",
    "TuningResult",
    "score_spec",
    "tune",
    "grid_search",
    "transfer",
    "check_transferable",
    "best_from_log",
]


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int

    @property
    def size(self):
        return self.hi - self.lo + 1

    def sample(self, rng):
        return int(rng.integers(self.lo, self.hi + 1))

    def contains(self, v):
        return isinstance(v, (int, np.integer)) and self.lo <= v <= self.hi

    def values(self):
        return list(range(self.lo, self.hi + 1))

    def grid(self, n):
        return sorted({int(round(v)) for v in np.linspace(self.lo, self.hi, n)})


@dataclass(frozen=True)
class FloatRange:
    """Open interval ``(lo, hi)``."""

    lo: float
    hi: float
    size = None

    def sample(self, rng):
        while True:
            v = float(rng.uniform(self.lo, self.hi))
            if self.lo < v < self.hi:
                return v

    def contains(self, v):
        return isinstance(v, float) and self.lo < v < self.hi

    def values(self):
        raise ValueError("a continuous domain cannot be enumerated")

    def grid(self, n):
        return [float(v) for v in np.linspace(self.lo, self.hi, n + 2)[1:-1]]


@dataclass(frozen=True)
class Choice:
    options: tuple

    @property
    def size(self):
        return len(self.options)

    def sample(self, rng):
        return self.options[int(rng.integers(len(self.options)))]

    def contains(self, v):
        return v in self.options

    def values(self):
        return list(self.options)

    def grid(self, n):
        return list(self.options)


@dataclass(frozen=True)
class Subsets:
    """All subsets of ``items`` with at least ``min_size`` members, as ordered lists."""

    items: tuple
    min_size: int = 1

    @property
    def size(self):
        return sum(math.comb(len(self.items), k) for k in range(self.min_size, len(self.items) + 1))

    def sample(self, rng):
        # uniform over the admissible subsets via rejection on the power set
        while True:
            mask = rng.random(len(self.items)) < 0.5
            if mask.sum() >= self.min_size:
                return [it for it, keep in zip(self.items, mask) if keep]

    def contains(self, v):
        return (
            isinstance(v, list)
            and len(v) >= self.min_size
            and len(set(v)) == len(v)
            and all(x in self.items for x in v)
            and v == [it for it in self.items if it in v]
        )

    def values(self):
        out = []
        for k in range(self.min_size, len(self.items) + 1):
            out.extend(list(c) for c in itertools.combinations(self.items, k))
        return out

    def grid(self, n):
        return self.values()


@dataclass(frozen=True)
class ParameterSpace:
    """Named domains for one classifier kind, plus fixed parameters.

    ``constraints`` are predicates over a full parameter dict; a sampled
    candidate violating any of them is rejected and redrawn.
    """

    kind: ClassifierKind
    domains: dict
    fixed: dict = field(default_factory=dict)
    constraints: tuple = ()

    @property
    def size(self):
        sizes = [d.size for d in self.domains.values()]
        if any(s is None for s in sizes):
            return None
        if self.constraints:
            return len(self.enumerate())
        return math.prod(sizes)

    def sample(self, rng) -> dict:
        while True:
            p = {name: d.sample(rng) for name, d in self.domains.items()}
            if all(c(p) for c in self.constraints):
                return {**self.fixed, **p}

    def contains(self, params: dict) -> bool:
        for name, d in self.domains.items():
            if name not in params or not d.contains(params[name]):
                return False
        return all(c(params) for c in self.constraints)

    def enumerate(self) -> list[dict]:
        return self._product({n: d.values() for n, d in self.domains.items()})

    def grid(self, n: int) -> list[dict]:
        return self._product({name: d.grid(n) for name, d in self.domains.items()})

    def _product(self, axes):
        names = list(axes)
        out = []
        for combo in itertools.product(*(axes[n] for n in names)):
            p = dict(zip(names, combo))
            if all(c(p) for c in self.constraints):
                out.append({**self.fixed, **p})
        return out


def _groups_ordered(p):
    return p["min_group"] <= p["max_group"]


def parameter_space(kind, series_length: int | None = None) -> ParameterSpace:
    """Search space of ``kind``; ``series_length`` caps length-bound parameters."""
    kind = ClassifierKind(kind)
    if kind is ClassifierKind.KNN:
        return ParameterSpace(
            kind,
            {
                "n_neighbors": IntRange(1, 30),
                "weights": Choice(("uniform", "distance")),
                "distance": Choice(("euclidean", "dtw", "twe")),
            },
        )
    if kind is ClassifierKind.TSF:
        hi = 30 if series_length is None else min(30, series_length)
        if hi < 3:
            raise ValueError(f"series of length {series_length} admit no TSF interval")
        return ParameterSpace(
            kind, {"n_estimators": IntRange(10, 500), "min_interval": IntRange(3, hi)}
        )
    if kind is ClassifierKind.SUMMARY:
        return ParameterSpace(
            kind,
            {"stats": Subsets(STATISTICS, 1), "quantiles": Subsets(QUANTILES, 0)},
            fixed={"n_estimators": 200},
        )
    if kind is ClassifierKind.ROTATION_FOREST:
        return ParameterSpace(
            kind,
            {
                "n_estimators": IntRange(10, 500),
                "min_group": IntRange(3, 30),
                "max_group": IntRange(3, 30),
                "remove_proportion": FloatRange(0.0, 1.0),
            },
            constraints=(_groups_ordered,),
        )
    raise ValueError(f"{kind} has no tunable parameters")


# ---------------------------------------------------------------------------


@dataclass
class TuningResult:
    kind: ClassifierKind
    best_spec: ClassifierSpec
    best_score: float
    log: list
    budget: int
    strategy: str = "random"

    @property
    def budget_used(self) -> int:
        return len(self.log)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(entry, separators=(",", ":")) + "\n" for entry in self.log)

    def summary(self) -> dict:
        return {
            "kind": self.kind.value,
            "strategy": self.strategy,
            "budget": self.budget,
            "budget_used": self.budget_used,
            "best_score": self.best_score,
            "best_index": best_from_log(self.log)["index"],
            "best_spec": self.best_spec.to_dict(),
        }

    def write(self, out_dir) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / f"tuning_{self.kind.value}.jsonl"
        best_path = out_dir / f"tuning_{self.kind.value}_best.json"
        log_path.write_text(self.to_jsonl())
        best_path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return log_path, best_path


def best_from_log(log) -> dict:
    """Highest-scoring entry; the earliest candidate wins ties."""
    if not log:
        raise ValueError("empty tuning log")
    return max(log, key=lambda e: (e["score"], -e["index"]))


def score_spec(spec: ClassifierSpec, dataset: Dataset) -> list[float]:
    """LOIO fold accuracies of ``spec`` on ``dataset``."""
    return [run_fold(spec, dataset, plan).accuracy for plan in make_splits(dataset, Protocol.LOIO)]


def _score_task(task):
    spec, dataset = task
    return score_spec(spec, dataset)


def _draw_candidates(space: ParameterSpace, budget: int, rng) -> list[dict]:
    size = space.size
    if size is not None and size <= 4 * budget:
        # small finite space: sample without replacement, exhaustive once budget >= size
        pool = space.enumerate()
        order = rng.permutation(len(pool))
        return [pool[i] for i in order[:budget]]
    seen, out = set(), []
    while len(out) < budget:
        p = space.sample(rng)
        key = json.dumps(p, sort_keys=True)
        if key in seen:
            continue
        seen.add(key)
        out.append(p)
    return out


def _evaluate(kind, candidates, dataset, seed, budget, strategy, mapper):
    clf_seed = derive_seed32(seed, "tuning", "classifier")
    specs = [ClassifierSpec(kind, p, clf_seed) for p in candidates]
    scores = list(mapper(_score_task, [(s, dataset) for s in specs]))
    log = [
        {
            "index": i,
            "params": s.params,
            "seed": clf_seed,
            "fold_accuracies": acc,
            "score": float(np.mean(acc)),
        }
        for i, (s, acc) in enumerate(zip(specs, scores))
    ]
    best = best_from_log(log)
    return TuningResult(kind, specs[best["index"]], best["score"], log, budget, strategy)


def tune(
    kind,
    dataset: Dataset,
    budget: int,
    seed: int = 0,
    space: ParameterSpace | None = None,
    mapper=map,
) -> TuningResult:
    """Random search of ``budget`` distinct candidates scored by mean LOIO accuracy."""
    try:
        kind = ClassifierKind(kind)
    except ValueError:
        raise ValueError(f"unknown classifier kind {kind!r}") from None
    if budget < 1:
        raise ValueError("budget must be >= 1")
    space = space or parameter_space(kind, dataset.length)
    rng = np.random.default_rng(derive_seed32(seed, "tuning", "sampler"))
    candidates = _draw_candidates(space, budget, rng)
    return _evaluate(kind, candidates, dataset, seed, budget, "random", mapper)


def grid_search(
    kind,
    dataset: Dataset,
    points: int = 50,
    seed: int = 0,
    space: ParameterSpace | None = None,
    mapper=map,
) -> TuningResult:
    """Exhaustive evaluation of ``space.grid(points)``."""
    kind = ClassifierKind(kind)
    space = space or parameter_space(kind, dataset.length)
    candidates = space.grid(points)
    return _evaluate(kind, candidates, dataset, seed, len(candidates), "grid", mapper)


# ---------------------------------------------------------------------------


def check_transferable(spec: ClassifierSpec, dataset: Dataset) -> None:
    """Raise ``ValueError`` if a parameter cannot apply to ``dataset``'s series."""
    m = dataset.length
    name = dataset.config.name if dataset.config else "the target dataset"
    if spec.kind is ClassifierKind.TSF and spec.params["min_interval"] > m:
        raise ValueError(
            f"min_interval={spec.params['min_interval']} exceeds the series length {m} "
            f"of {name}; re-tune on this trajectory type or set min_interval <= {m}"
        )
    if spec.kind is ClassifierKind.SUMMARY and m < 2:
        raise ValueError(f"summary statistics need series of length >= 2, {name} has {m}")


def transfer(
    spec: ClassifierSpec,
    target_dataset: Dataset,
    protocol=Protocol.LOIO,
    model: str = "",
) -> list:
    """Evaluate ``spec`` unchanged on another trajectory type."""
    check_transferable(spec, target_dataset)
    traj = target_dataset.config.name if target_dataset.config else ""
    return [
        run_fold(spec, target_dataset, plan, model, traj)
        for plan in make_splits(target_dataset, protocol)
    ]
