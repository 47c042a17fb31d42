"""Cross-validation protocols, benchmark aggregation and report exports."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.special import kolmogorov

from .classifiers import ClassifierSpec, fit, predict_batch
from .errors import IncompleteDataError
from .optimizers import ALGORITHM_ORDER
from .seeds import derive_seed32
from .trajectories import Dataset

__all__ = [
    "Protocol",
    "SplitPlan",
    "FoldResult",
    "BenchmarkReport",
    "Heatmap",
    "ThresholdCounts",
    "make_splits",
    "run_fold",
    "run_cell",
    "run_benchmark",
    "threshold_counts",
    "ks_statistic",
    "read_heatmap_csv",
    "parse_heatmap_csv",
    "repetition_seed",
]

CLASS_NAMES = tuple(a.value for a in ALGORITHM_ORDER)


class Protocol(str, Enum):
    LOIO = "LOIO"
    LOPO = "LOPO"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, eq=False)
class SplitPlan:
    protocol: Protocol
    held_out: int
    train_indices: np.ndarray
    test_indices: np.ndarray


@dataclass(frozen=True, eq=False)
class FoldResult:
    plan: SplitPlan
    spec: ClassifierSpec
    predictions: np.ndarray
    truth: np.ndarray
    accuracy: float
    recall: dict
    train_fingerprint: str
    model: str = ""
    trajectory: str = ""

    @property
    def protocol(self) -> Protocol:
        return self.plan.protocol

    @property
    def held_out(self) -> int:
        return self.plan.held_out

    @property
    def seed(self) -> int:
        return self.spec.rng_seed


def make_splits(dataset: Dataset, protocol) -> list[SplitPlan]:
    """One plan per instance id (LOIO) or per function id (LOPO), in id order."""
    protocol = Protocol(protocol)
    fids, iids = dataset.function_ids, dataset.instance_ids
    if len(dataset) == 0:
        raise IncompleteDataError("cannot split an empty dataset")
    present = set(zip(fids.tolist(), iids.tolist()))
    missing = [
        (f, i) for f in np.unique(fids).tolist() for i in np.unique(iids).tolist()
        if (f, i) not in present
    ]
    if missing:
        raise IncompleteDataError(
            f"{len(missing)} (function, instance) cells have no trajectories", missing
        )
    key = iids if protocol is Protocol.LOIO else fids
    # canonical row order, so that fold results do not depend on how the
    # dataset happens to be sorted
    canon = np.lexsort((dataset.run_indices, iids, fids))
    plans = []
    for unit in np.unique(key).tolist():
        mask = key[canon] == unit
        plans.append(SplitPlan(protocol, int(unit), canon[~mask], canon[mask]))
    return plans


def _recall(truth, pred):
    out = {}
    for c in CLASS_NAMES:
        mask = truth == c
        out[c] = float(np.mean(pred[mask] == c)) if mask.any() else None
    return out


def run_fold(
    spec: ClassifierSpec, dataset: Dataset, plan: SplitPlan, model: str = "", trajectory: str = ""
) -> FoldResult:
    """Fit on the plan's training rows only and score on its test rows."""
    train = dataset.subset(plan.train_indices)
    test = dataset.subset(plan.test_indices)
    try:
        trained = fit(spec, train)
        pred = predict_batch(trained, test)
    except ValueError as exc:
        raise ValueError(f"{model or spec.kind} {plan.protocol} fold {plan.held_out}: {exc}") from exc
    except Exception as exc:
        raise RuntimeError(
            f"{model or spec.kind} {plan.protocol} fold {plan.held_out}: {exc}"
        ) from exc
    truth = test.labels
    acc = float(np.count_nonzero(pred == truth)) / len(test) if len(test) else 0.0
    return FoldResult(
        plan, spec, pred, truth, acc, _recall(truth, pred), trained.fingerprint, model, trajectory
    )


def repetition_seed(master_seed: int, repetition: int) -> int:
    """Classifier seed of one repetition; shared by all models so comparisons are paired."""
    return derive_seed32(master_seed, "classifier", repetition)


def run_cell(task) -> list[FoldResult]:
    """All folds of one (model, trajectory, protocol, seed) combination.

    ``task`` is ``(model_name, spec, dataset, protocol[, trajectory])``; it is
    a plain tuple so that it can be shipped to worker processes. The
    trajectory name defaults to the dataset's own configuration.
    """
    name, spec, dataset, protocol, *rest = task
    traj = rest[0] if rest else (dataset.config.name if dataset.config else "")
    return [run_fold(spec, dataset, plan, name, traj) for plan in make_splits(dataset, protocol)]


def run_benchmark(
    roster: dict,
    datasets: dict,
    protocols=(Protocol.LOIO,),
    repetitions: int = 10,
    master_seed: int = 0,
    mapper=map,
) -> "BenchmarkReport":
    """Evaluate every roster entry on every dataset under every protocol.

    Parameters
    ----------
    roster : dict
        ``name -> ClassifierSpec`` or ``name -> (ClassifierSpec, trajectory names)``
        where the second element restricts the entry to some datasets.
    datasets : dict
        ``trajectory name -> Dataset``.
    mapper : callable
        ``map``-compatible; pass ``executor.map`` to fan out. Results are
        collected by task position, never by completion order.
    """
    tasks = []
    for name, entry in roster.items():
        spec, only = entry if isinstance(entry, tuple) else (entry, None)
        for traj, ds in datasets.items():
            if only is not None and traj not in only:
                continue
            for protocol in protocols:
                for rep in range(repetitions):
                    seeded = spec.with_seed(repetition_seed(master_seed, rep))
                    tasks.append((name, seeded, ds, Protocol(protocol), traj))
    folds = [f for cell in mapper(run_cell, tasks) for f in cell]
    return BenchmarkReport.from_folds(folds)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    model: str
    kind: str
    trajectory: str
    protocol: str
    held_out: int
    seed: int
    n_test: int
    accuracy: float
    recall: tuple  # parallel to CLASS_NAMES; None where the class is absent


@dataclass(frozen=True)
class Heatmap:
    """Accuracy matrix of one trajectory type: models x held-out units."""

    protocol: Protocol
    trajectory: str
    models: tuple
    units: tuple
    values: np.ndarray

    def column_labels(self) -> list[str]:
        prefix = "F" if self.protocol is Protocol.LOPO else "I"
        return [f"{prefix}{u}" for u in self.units]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", *self.column_labels()])
        for m, row in zip(self.models, self.values):
            w.writerow([m, *(repr(float(v)) for v in row)])
        return buf.getvalue()


@dataclass(frozen=True)
class ThresholdCounts:
    """``per_model[m] = (n_high, n_low)`` and ``per_function[f] = (n_high, n_low)``."""

    per_model: dict
    per_function: dict
    lo: float
    hi: float

    def model_csv(self) -> str:
        rows = [(m, hi, lo) for m, (hi, lo) in self.per_model.items()]
        return _rows_to_csv(["model", "n_functions_high", "n_functions_low"], rows)

    def function_csv(self) -> str:
        rows = [(f"F{f}", hi, lo) for f, (hi, lo) in self.per_function.items()]
        return _rows_to_csv(["function", "n_models_high", "n_models_low"], rows)


def _rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    return "" if v is None else repr(float(v))


@dataclass
class BenchmarkReport:
    """Flat per-(model, trajectory, protocol, fold, seed) accuracy table."""

    rows: list = field(default_factory=list)
    folds: list = field(default_factory=list, repr=False)

    @classmethod
    def from_folds(cls, folds) -> "BenchmarkReport":
        rows = [
            ReportRow(
                f.model or str(f.spec.kind),
                str(f.spec.kind),
                f.trajectory,
                str(f.protocol),
                f.held_out,
                f.seed,
                int(len(f.truth)),
                f.accuracy,
                tuple(f.recall[c] for c in CLASS_NAMES),
            )
            for f in folds
        ]
        order = sorted(
            range(len(rows)),
            key=lambda i: (rows[i].model, rows[i].trajectory, rows[i].protocol,
                           rows[i].held_out, rows[i].seed),
        )
        return cls([rows[i] for i in order], [folds[i] for i in order])

    def select(self, model=None, trajectory=None, protocol=None) -> list:
        return [
            r for r in self.rows
            if (model is None or r.model == model)
            and (trajectory is None or r.trajectory == trajectory)
            and (protocol is None or r.protocol == str(protocol))
        ]

    @property
    def models(self) -> list[str]:
        return sorted({r.model for r in self.rows})

    @property
    def trajectories(self) -> list[str]:
        return sorted({r.trajectory for r in self.rows})

    def accuracies(self, model, trajectory, protocol) -> np.ndarray:
        return np.array([r.accuracy for r in self.select(model, trajectory, protocol)])

    def mean_accuracy(self, model, trajectory, protocol) -> float:
        acc = self.accuracies(model, trajectory, protocol)
        if acc.size == 0:
            raise KeyError(f"no results for {model} / {trajectory} / {protocol}")
        return float(np.mean(acc))

    def median_accuracy(self, model, trajectory, protocol) -> float:
        acc = self.accuracies(model, trajectory, protocol)
        if acc.size == 0:
            raise KeyError(f"no results for {model} / {trajectory} / {protocol}")
        return float(statistics.median(acc.tolist()))

    def heatmap(self, trajectory: str, protocol=Protocol.LOPO) -> Heatmap:
        """Mean accuracy over seeds for every model and held-out unit."""
        protocol = Protocol(protocol)
        rows = self.select(trajectory=trajectory, protocol=protocol)
        if not rows:
            raise KeyError(f"no {protocol} results for {trajectory}")
        models = tuple(sorted({r.model for r in rows}))
        units = tuple(sorted({r.held_out for r in rows}))
        cells = {}
        for r in rows:
            cells.setdefault((r.model, r.held_out), []).append(r.accuracy)
        values = np.full((len(models), len(units)), np.nan)
        for a, m in enumerate(models):
            for b, u in enumerate(units):
                if (m, u) in cells:
                    values[a, b] = float(np.mean(cells[(m, u)]))
        return Heatmap(protocol, trajectory, models, units, values)

    # exports ---------------------------------------------------------------

    def tidy_csv(self) -> str:
        header = ["model", "kind", "trajectory", "protocol", "held_out", "seed", "n_test",
                  "accuracy", *(f"recall_{c}" for c in CLASS_NAMES)]
        rows = [
            [r.model, r.kind, r.trajectory, r.protocol, r.held_out, r.seed, r.n_test,
             repr(r.accuracy), *(_fmt(v) for v in r.recall)]
            for r in self.rows
        ]
        return _rows_to_csv(header, rows)

    def summary_csv(self) -> str:
        groups = sorted({(r.model, r.trajectory, r.protocol) for r in self.rows})
        out = []
        for m, t, p in groups:
            acc = self.accuracies(m, t, p)
            out.append([m, t, p, acc.size, repr(float(np.mean(acc))),
                        repr(float(statistics.median(acc.tolist())))])
        return _rows_to_csv(["model", "trajectory", "protocol", "n", "mean_accuracy",
                             "median_accuracy"], out)

    def write(self, out_dir, lo: float = 0.10, hi: float = 0.90) -> list[Path]:
        """Write every report artifact below ``out_dir``; returns the paths written."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        files = {"accuracy_tidy.csv": self.tidy_csv(), "accuracy_summary.csv": self.summary_csv()}
        for traj in self.trajectories:
            if not self.select(trajectory=traj, protocol=Protocol.LOPO):
                continue
            hm = self.heatmap(traj, Protocol.LOPO)
            tc = threshold_counts(hm, lo, hi)
            files[f"lopo_heatmap_{traj}.csv"] = hm.to_csv()
            files[f"threshold_models_{traj}.csv"] = tc.model_csv()
            files[f"threshold_functions_{traj}.csv"] = tc.function_csv()
        paths = []
        for name, text in files.items():
            p = out_dir / name
            p.write_text(text)
            paths.append(p)
        return paths


def parse_heatmap_csv(text: str, trajectory: str = "") -> Heatmap:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    units = tuple(int(h.lstrip("F")) for h in header[1:])
    models = tuple(r[0] for r in body)
    values = np.array([[float(v) for v in r[1:]] for r in body], dtype=np.float64)
    return Heatmap(Protocol.LOPO, trajectory, models, units, values.reshape(len(models), len(units)))


def read_heatmap_csv(path, trajectory: str = "") -> Heatmap:
    return parse_heatmap_csv(Path(path).read_text(), trajectory)


def threshold_counts(report, lo: float = 0.10, hi: float = 0.90, trajectory: str | None = None):
    """Count functions per model (and models per function) at acc >= hi or <= lo.

    ``report`` is a LOPO :class:`Heatmap`, or a :class:`BenchmarkReport`
    together with the ``trajectory`` whose LOPO heatmap should be used.
    """
    if isinstance(report, BenchmarkReport):
        if trajectory is None:
            raise ValueError("a trajectory name is needed to pick the LOPO heatmap")
        if not report.select(trajectory=trajectory, protocol=Protocol.LOPO):
            raise ValueError("threshold counts need LOPO results")
        report = report.heatmap(trajectory, Protocol.LOPO)
    if report.protocol is not Protocol.LOPO:
        raise ValueError(f"threshold counts are defined on LOPO reports, got {report.protocol}")
    if not lo < hi:
        raise ValueError("lo must be below hi")
    V = report.values
    high, low = V >= hi, V <= lo
    per_model = {
        m: (int(high[a].sum()), int(low[a].sum())) for a, m in enumerate(report.models)
    }
    per_function = {
        u: (int(high[:, b].sum()), int(low[:, b].sum())) for b, u in enumerate(report.units)
    }
    return ThresholdCounts(per_model, per_function, lo, hi)


def ks_statistic(sample_a, sample_b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.

    The p-value uses the Kolmogorov limiting distribution evaluated at
    ``(sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) * D`` with ``ne = na nb / (na + nb)``.
    """
    a = np.sort(np.asarray(sample_a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(sample_b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    Fa = np.searchsorted(a, grid, side="right") / a.size
    Fb = np.searchsorted(b, grid, side="right") / b.size
    D = float(np.max(np.abs(Fa - Fb)))
    en = np.sqrt(a.size * b.size / (a.size + b.size))
    p = float(np.clip(kolmogorov((en + 0.12 + 0.11 / en) * D), 0.0, 1.0))
    return D, p
