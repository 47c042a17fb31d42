"""Probing trajectories, winner labels and the classification dataset."""

from __future__ import annotations

import csv
import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import IncompleteDataError
from .optimizers import ALGORITHM_ORDER, Algorithm, RunRecord

__all__ = [
    "Kind",
    "Source",
    "Trajectory",
    "Dataset",
    "TrajectoryConfig",
    "best_trajectory",
    "current_trajectory",
    "all_trajectory",
    "compute_labels",
    "build_dataset",
    "save_dataset",
    "load_dataset",
]


class Kind(str, Enum):
    BEST = "best"
    CURRENT = "current"

    def __str__(self) -> str:
        return self.value


class Source(str, Enum):
    CMAES = "CMAES"
    DE = "DE"
    PSO = "PSO"
    ALL = "ALL"

    def __str__(self) -> str:
        return self.value


def _check_length(run: RunRecord, g: int) -> int:
    if g < 1:
        raise ValueError("g must be a positive number of generations")
    n = g * run.population_size
    if n > run.budget:
        raise ValueError(
            f"run has {run.budget} evaluations, {g} generations of "
            f"{run.population_size} need {n}"
        )
    return n


def best_trajectory(run: RunRecord, g: int) -> np.ndarray:
    """Best-so-far objective value after each of the first ``g`` generations' evaluations."""
    n = _check_length(run, g)
    return np.minimum.accumulate(run.evals[:n])


def current_trajectory(run: RunRecord, g: int) -> np.ndarray:
    """Raw objective values of the first ``g`` generations, verbatim."""
    n = _check_length(run, g)
    return np.array(run.evals[:n])


_EXTRACT = {Kind.BEST: best_trajectory, Kind.CURRENT: current_trajectory}


def all_trajectory(cma: RunRecord, de: RunRecord, pso: RunRecord, kind, g: int) -> np.ndarray:
    """Concatenate CMA-ES, DE and PSO trajectories of one (function, instance, run)."""
    runs = (cma, de, pso)
    for run, alg in zip(runs, ALGORITHM_ORDER):
        if run.algorithm is not alg:
            raise ValueError(f"expected a {alg} run in position {ALGORITHM_ORDER.index(alg)}")
    if len({r.key for r in runs}) != 1:
        raise ValueError(f"runs disagree on (function, instance, run): {[r.key for r in runs]}")
    extract = _EXTRACT[Kind(kind)]
    return np.concatenate([extract(r, g) for r in runs])


@dataclass(frozen=True)
class Trajectory:
    series: np.ndarray
    kind: Kind
    source: Source
    generations: int
    function_id: int
    instance_id: int
    run_index: int
    label: str


@dataclass(frozen=True)
class TrajectoryConfig:
    """One dataset flavour, e.g. ``cmaes-best-g2``."""

    source: Source
    kind: Kind
    generations: int

    def __post_init__(self):
        object.__setattr__(self, "source", Source(self.source))
        object.__setattr__(self, "kind", Kind(self.kind))

    @property
    def name(self) -> str:
        return f"{self.source.value.lower()}-{self.kind.value}-g{self.generations}"

    @classmethod
    def parse(cls, name: str) -> "TrajectoryConfig":
        try:
            source, kind, g = name.split("-")
            return cls(Source(source.upper()), Kind(kind), int(g.lstrip("g")))
        except (ValueError, KeyError) as exc:
            raise ValueError(f"bad trajectory name {name!r}; expected e.g. 'cmaes-best-g2'") from exc

    def __str__(self) -> str:
        return self.name


@dataclass(eq=False)
class Dataset:
    """Homogeneous set of labelled trajectories stored as a matrix.

    Row ``i`` of ``series`` belongs to ``(function_ids[i], instance_ids[i],
    run_indices[i])`` and carries ``labels[i]``.
    """

    series: np.ndarray
    function_ids: np.ndarray
    instance_ids: np.ndarray
    run_indices: np.ndarray
    labels: np.ndarray
    config: TrajectoryConfig | None = None
    label_table: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)

    def __post_init__(self):
        self.series = np.asarray(self.series, dtype=np.float64)
        if self.series.ndim != 2:
            raise ValueError("series must be a 2-d array (ragged trajectories are not supported)")
        n = self.series.shape[0]
        self.function_ids = np.asarray(self.function_ids, dtype=np.int64)
        self.instance_ids = np.asarray(self.instance_ids, dtype=np.int64)
        self.run_indices = np.asarray(self.run_indices, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=object)
        for name in ("function_ids", "instance_ids", "run_indices", "labels"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have one entry per series")

    def __len__(self) -> int:
        return self.series.shape[0]

    @property
    def length(self) -> int:
        return self.series.shape[1]

    @property
    def trajectories(self) -> list[Trajectory]:
        cfg = self.config
        return [
            Trajectory(
                series=self.series[i],
                kind=cfg.kind if cfg else None,
                source=cfg.source if cfg else None,
                generations=cfg.generations if cfg else 0,
                function_id=int(self.function_ids[i]),
                instance_id=int(self.instance_ids[i]),
                run_index=int(self.run_indices[i]),
                label=self.labels[i],
            )
            for i in range(len(self))
        ]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.series[idx],
            self.function_ids[idx],
            self.instance_ids[idx],
            self.run_indices[idx],
            self.labels[idx],
            self.config,
            self.label_table,
            self.seeds,
        )

    def fingerprint(self) -> str:
        """SHA-256 over series bytes, labels and cell identities."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.series).tobytes())
        h.update(self.function_ids.tobytes())
        h.update(self.instance_ids.tobytes())
        h.update(self.run_indices.tobytes())
        h.update("\x1f".join(map(str, self.labels)).encode())
        return h.hexdigest()


def compute_labels(long_runs, per_instance: bool = False, precision_floor: float = 1e-8) -> dict:
    """Winner per function: lowest median target precision ``best_final - f_opt``.

    Precisions below ``precision_floor`` count as having hit the final target,
    so runs that all converged tie. Ties resolve in the order CMAES < DE < PSO. With ``per_instance=True`` the
    median is taken per (function, instance) and keys are ``(function_id,
    instance_id)`` tuples.

    ``long_runs`` may hold :class:`RunRecord` objects or mappings with the keys
    ``algorithm``, ``function_id``, ``instance_id``, ``best_final`` and ``f_opt``.
    """
    groups = defaultdict(lambda: defaultdict(list))
    for r in long_runs:
        if isinstance(r, dict):
            alg, f, inst = Algorithm(r["algorithm"]), int(r["function_id"]), int(r["instance_id"])
            precision = float(r["best_final"]) - float(r.get("f_opt", 0.0))
        else:
            alg, f, inst = r.algorithm, r.function_id, r.instance_id
            precision = r.best_final - r.f_opt
        key = (f, inst) if per_instance else f
        groups[key][alg].append(max(precision, precision_floor))

    labels = {}
    missing = []
    for key in sorted(groups):
        by_alg = groups[key]
        absent = [a.value for a in ALGORITHM_ORDER if not by_alg.get(a)]
        if absent:
            missing.extend((key, a) for a in absent)
            continue
        medians = [float(np.median(by_alg[a])) for a in ALGORITHM_ORDER]
        labels[key] = ALGORITHM_ORDER[int(np.argmin(medians))].value
    if missing:
        raise IncompleteDataError(
            f"no labelling runs for {len(missing)} (cell, algorithm) pairs, e.g. {missing[:3]}",
            missing,
        )
    return labels


def build_dataset(
    runs,
    config: TrajectoryConfig,
    label_table: dict,
    normalize: bool = False,
    seeds: dict | None = None,
) -> Dataset:
    """Assemble the dataset for one trajectory config from probing runs.

    Rows are ordered by (function, instance, run). ``label_table`` is keyed by
    function id, or by ``(function_id, instance_id)`` for per-instance labels.
    With ``normalize=True`` each series is z-normalised (constant series map
    to zeros).
    """
    index = {}
    for r in runs:
        index[(r.algorithm, *r.key)] = r
    cells = sorted({k[1:] for k in index})
    if config.source is Source.ALL:
        needed = ALGORITHM_ORDER
    else:
        needed = (Algorithm(config.source.value),)
    missing = [(alg.value, *c) for c in cells for alg in needed if (alg, *c) not in index]
    if missing:
        raise IncompleteDataError(f"{len(missing)} probing runs missing, e.g. {missing[:3]}", missing)

    extract = _EXTRACT[config.kind]
    rows, labels = [], []
    for f, inst, run in cells:
        if config.source is Source.ALL:
            s = all_trajectory(*(index[(a, f, inst, run)] for a in ALGORITHM_ORDER), config.kind,
                               config.generations)
        else:
            s = extract(index[(needed[0], f, inst, run)], config.generations)
        rows.append(s)
        key = (f, inst) if label_table and isinstance(next(iter(label_table)), tuple) else f
        if key not in label_table:
            raise IncompleteDataError(f"no label for {key}", [key])
        labels.append(label_table[key])
    series = np.vstack(rows)
    if normalize:
        mu = series.mean(axis=1, keepdims=True)
        sd = series.std(axis=1, keepdims=True)
        series = np.where(sd > 0, (series - mu) / np.where(sd > 0, sd, 1.0), 0.0)
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
    return Dataset(
        series,
        cells[:, 0],
        cells[:, 1],
        cells[:, 2],
        np.asarray(labels, dtype=object),
        config,
        dict(label_table),
        dict(seeds or {}),
    )


def _label_table_to_json(table: dict) -> list:
    return [[list(k) if isinstance(k, tuple) else k, v] for k, v in sorted(table.items())]


def _label_table_from_json(items) -> dict:
    return {(tuple(k) if isinstance(k, list) else int(k)): v for k, v in items}


def save_dataset(ds: Dataset, path) -> None:
    """Write ``<path>.csv`` (metadata + series columns) and ``<path>.json`` sidecar."""
    path = Path(path)
    csv_path = path.with_suffix(".csv")
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["function_id", "instance_id", "run_index", "label"]
                   + [f"t{i}" for i in range(ds.length)])
        for i in range(len(ds)):
            w.writerow([int(ds.function_ids[i]), int(ds.instance_ids[i]), int(ds.run_indices[i]),
                        ds.labels[i]] + [repr(float(v)) for v in ds.series[i]])
    sidecar = {
        "kind": ds.config.kind.value if ds.config else None,
        "source": ds.config.source.value if ds.config else None,
        "generations": ds.config.generations if ds.config else None,
        "length": ds.length,
        "label_table": _label_table_to_json(ds.label_table),
        "seeds": ds.seeds,
        "fingerprint": ds.fingerprint(),
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=1, sort_keys=True))


def load_dataset(path) -> Dataset:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    with path.with_suffix(".csv").open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    config = None
    if meta.get("source"):
        config = TrajectoryConfig(Source(meta["source"]), Kind(meta["kind"]), int(meta["generations"]))
    ds = Dataset(
        np.array([[float(v) for v in r[4:]] for r in rows]).reshape(len(rows), -1),
        [int(r[0]) for r in rows],
        [int(r[1]) for r in rows],
        [int(r[2]) for r in rows],
        [r[3] for r in rows],
        config,
        _label_table_from_json(meta["label_table"]),
        meta.get("seeds", {}),
    )
    if ds.fingerprint() != meta["fingerprint"]:
        raise ValueError(f"dataset {path} does not match its recorded fingerprint")
    return ds
