"""End-to-end steps behind the CLI: run archive, datasets, benchmark, tuning."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, dump_config
from .errors import ConfigError, IncompleteDataError
from .evaluation import (
    BenchmarkReport,
    Protocol,
    ks_statistic,
    parse_heatmap_csv,
    run_benchmark,
    threshold_counts,
)
from .optimizers import ALGORITHM_ORDER, OptimizerConfig, read_archive, run_long, write_archive
from .problems import catalog_to_json, make_instance
from .seeds import derive_seed, derive_seed32
from .trajectories import build_dataset, compute_labels, save_dataset
from .tuning import tune

log = logging.getLogger("probesel")

__all__ = [
    "next_version_dir",
    "latest_version_dir",
    "worker_mapper",
    "instance_seed",
    "run_seed",
    "generate_archive",
    "load_archive",
    "build_datasets",
    "benchmark",
    "tune_kind",
    "build_report",
    "report_checksums",
]

MANIFEST_VERSION = 1


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def next_version_dir(root) -> Path:
    """Create and return ``root/vNNN`` with the next unused number."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    used = [int(m.group(1)) for p in root.iterdir() if (m := re.fullmatch(r"v(\d{3,})", p.name))]
    n = max(used, default=0) + 1
    while True:
        path = root / f"v{n:03d}"
        try:
            path.mkdir()
            return path
        except FileExistsError:
            n += 1


def latest_version_dir(root, required: str) -> Path:
    root = Path(root)
    found = sorted(
        (int(m.group(1)), p)
        for p in (root.iterdir() if root.is_dir() else [])
        if (m := re.fullmatch(r"v(\d{3,})", p.name)) and (p / required).exists()
    )
    if not found:
        raise IncompleteDataError(f"no completed output with {required} under {root}")
    return found[-1][1]


@contextmanager
def worker_mapper(workers: int):
    """``map``-compatible callable backed by a process pool when ``workers > 1``."""
    n = workers or os.cpu_count() or 1
    if n <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=n) as pool:
        yield lambda fn, items: pool.map(fn, items, chunksize=1)


# ---------------------------------------------------------------------------
# run archive


def instance_seed(cfg: ExperimentConfig) -> int:
    return derive_seed32(cfg.master_seed, "instances")


def run_seed(cfg: ExperimentConfig, algorithm, f: int, inst: int, run: int) -> int:
    return derive_seed(cfg.master_seed, "run", str(algorithm), f, inst, run)


def _generate_cell(task):
    """Labelling runs of one (algorithm, function, instance); probing runs are their prefixes."""
    alg, f, inst, runs, dim, pop, label_budget, probe_len, iseed, seeds = task
    instance = make_instance(f, dim, inst, iseed)
    probes, longs = [], []
    for r in range(runs):
        cfg = OptimizerConfig(alg, pop, rng_seed=seeds[r], population_size=pop)
        long = run_long(cfg, instance, label_budget, run_index=r)
        probes.append(long.truncated(probe_len))
        longs.append(
            {
                "algorithm": long.algorithm.value,
                "function_id": f,
                "instance_id": inst,
                "run_index": r,
                "seed": long.seed,
                "budget": long.budget,
                "best_final": long.best_final,
                "f_opt": long.f_opt,
            }
        )
    return probes, longs


def generate_archive(cfg: ExperimentConfig, out_dir: Path, mapper=map) -> dict:
    """Run every optimizer on every cell and write the archive into ``out_dir``.

    Files: ``runs.jsonl`` (probing prefixes), ``labels.jsonl`` (labelling run
    summaries), ``instances.json`` and ``manifest.json`` with seeds and
    SHA-256 checksums.
    """
    out_dir = Path(out_dir)
    iseed = instance_seed(cfg)
    max_g = max(cfg.generations)
    tasks = []
    for alg in ALGORITHM_ORDER:
        pop = cfg.population(alg)
        for f in sorted(cfg.functions):
            for inst in sorted(cfg.instances):
                seeds = [run_seed(cfg, alg, f, inst, r) for r in range(cfg.runs_per_instance)]
                tasks.append((alg, f, inst, cfg.runs_per_instance, cfg.dimension, pop,
                              cfg.label_budget, max_g * pop, iseed, seeds))
    probes, longs = [], []
    for p, q in mapper(_generate_cell, tasks):
        probes.extend(p)
        longs.extend(q)

    runs_path = out_dir / "runs.jsonl"
    labels_path = out_dir / "labels.jsonl"
    inst_path = out_dir / "instances.json"
    write_archive(probes, runs_path)
    labels_path.write_text("".join(json.dumps(d, separators=(",", ":")) + "\n" for d in longs))
    instances = [make_instance(f, cfg.dimension, i, iseed)
                 for f in sorted(cfg.functions) for i in sorted(cfg.instances)]
    inst_path.write_text(catalog_to_json(instances))

    entries = []
    for p, q in zip(probes, longs):
        entries.append({
            "algorithm": p.algorithm.value,
            "function_id": p.function_id,
            "instance_id": p.instance_id,
            "run_index": p.run_index,
            "seed": p.seed,
            "probe_evaluations": p.budget,
            "probe_sha256": _sha256(np.ascontiguousarray(p.evals).tobytes()),
            "label_budget": q["budget"],
            "best_final": q["best_final"],
        })
    manifest = {
        "format": "probesel.archive",
        "version": MANIFEST_VERSION,
        "master_seed": cfg.master_seed,
        "instance_seed": iseed,
        "seed_derivation": "splitmix64 path: ('run', algorithm, function, instance, run)",
        "config_sha256": _sha256(dump_config(cfg).encode()),
        "files": {p.name: _sha256(p.read_bytes()) for p in (runs_path, labels_path, inst_path)},
        "entries": entries,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest


def load_archive(cfg: ExperimentConfig, archive_dir: Path):
    """Read and verify an archive; returns ``(probing runs, labelling summaries)``.

    Raises :class:`IncompleteDataError` listing the missing cells when the
    archive does not cover the configuration, or when a checksum fails.
    """
    archive_dir = Path(archive_dir)
    try:
        manifest = json.loads((archive_dir / "manifest.json").read_text())
    except OSError as exc:
        raise IncompleteDataError(f"no manifest in {archive_dir}: {exc}") from exc
    for name, digest in manifest["files"].items():
        path = archive_dir / name
        if not path.exists() or _sha256(path.read_bytes()) != digest:
            raise IncompleteDataError(f"{path} is missing or fails its checksum", [name])
    probes = read_archive(archive_dir / "runs.jsonl")
    longs = [json.loads(line) for line in (archive_dir / "labels.jsonl").read_text().splitlines() if line]
    have_probe = {(r.algorithm.value, *r.key): r for r in probes}
    have_long = {(d["algorithm"], d["function_id"], d["instance_id"], d["run_index"]) for d in longs}
    need = max(cfg.generations)
    missing = []
    for alg in ALGORITHM_ORDER:
        for f in cfg.functions:
            for i in cfg.instances:
                for r in range(cfg.runs_per_instance):
                    key = (alg.value, f, i, r)
                    rec = have_probe.get(key)
                    if rec is None or key not in have_long or rec.budget < need * rec.population_size:
                        missing.append(key)
    if missing:
        raise IncompleteDataError(
            f"archive {archive_dir} lacks {len(missing)} runs, e.g. {missing[:5]}", missing
        )
    keep_f, keep_i = set(cfg.functions), set(cfg.instances)
    probes = [r for r in probes if r.function_id in keep_f and r.instance_id in keep_i
              and r.run_index < cfg.runs_per_instance]
    longs = [d for d in longs if d["function_id"] in keep_f and d["instance_id"] in keep_i
             and d["run_index"] < cfg.runs_per_instance]
    return probes, longs


def build_datasets(cfg: ExperimentConfig, probes, longs, out_dir: Path | None = None):
    """Label table and one Dataset per configured trajectory type."""
    labels = compute_labels(longs, cfg.per_instance_labels, cfg.precision_floor)
    seeds = {"master_seed": cfg.master_seed, "instance_seed": derive_seed32(cfg.master_seed, "instances")}
    datasets = {}
    for tc in cfg.trajectory_configs:
        ds = build_dataset(probes, tc, labels, cfg.normalize, seeds)
        datasets[tc.name] = ds
        if out_dir is not None:
            save_dataset(ds, Path(out_dir) / tc.name)
    return labels, datasets


# ---------------------------------------------------------------------------


def benchmark(cfg: ExperimentConfig, datasets: dict, roster: dict, mapper=map) -> BenchmarkReport:
    """LOIO on every data set, LOPO on ``cfg.lopo_trajectories`` (or all)."""
    folds = []
    for protocol in cfg.protocols:
        chosen = datasets
        if Protocol(protocol) is Protocol.LOPO and cfg.lopo_trajectories:
            chosen = {k: v for k, v in datasets.items() if k in cfg.lopo_trajectories}
        rep = run_benchmark(roster, chosen, (protocol,), cfg.repetitions, cfg.master_seed, mapper)
        folds.extend(rep.folds)
    return BenchmarkReport.from_folds(folds)


def tune_kind(cfg: ExperimentConfig, kind: str, datasets: dict, budget: int | None = None, mapper=map):
    name = cfg.tuning_trajectory
    if name not in datasets:
        raise ConfigError(f"tuning trajectory {name!r} is not among the configured data sets")
    if budget is None:
        if kind not in cfg.tuning_budget:
            raise ConfigError(f"no tuning budget configured for {kind}")
        budget = cfg.tuning_budget[kind]
    seed = derive_seed32(cfg.master_seed, "tune", kind)
    return tune(kind, datasets[name], budget, seed, mapper=mapper)


def build_report(benchmark_dir: Path, out_dir: Path, lo: float = 0.10, hi: float = 0.90) -> list[Path]:
    """Analyses recomputed from persisted benchmark CSVs only.

    Writes threshold counts per LOPO heatmap, and KS comparisons of every
    ``X`` / ``X-tuned`` pair of LOIO accuracy distributions.
    """
    import csv

    benchmark_dir, out_dir = Path(benchmark_dir), Path(out_dir)
    written = []
    for hm_path in sorted(benchmark_dir.glob("lopo_heatmap_*.csv")):
        traj = hm_path.stem[len("lopo_heatmap_"):]
        tc = threshold_counts(parse_heatmap_csv(hm_path.read_text(), traj), lo, hi)
        for name, text in ((f"threshold_models_{traj}.csv", tc.model_csv()),
                           (f"threshold_functions_{traj}.csv", tc.function_csv())):
            (out_dir / name).write_text(text)
            written.append(out_dir / name)

    tidy = benchmark_dir / "accuracy_tidy.csv"
    if not tidy.exists():
        raise IncompleteDataError(f"{tidy} not found")
    acc = {}
    with tidy.open(newline="") as fh:
        for row in csv.DictReader(fh):
            if row["protocol"] == "LOIO":
                acc.setdefault((row["model"], row["trajectory"]), []).append(float(row["accuracy"]))
    lines = [["model", "tuned_model", "trajectory", "ks_statistic", "p_value"]]
    for (model, traj), a in sorted(acc.items()):
        b = acc.get((f"{model}-tuned", traj))
        if b is None:
            continue
        d, p = ks_statistic(a, b)
        lines.append([model, f"{model}-tuned", traj, repr(d), repr(p)])
    ks_path = out_dir / "ks_tuned_vs_default.csv"
    with ks_path.open("w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(lines)
    written.append(ks_path)
    return written


def report_checksums(paths) -> dict:
    return {Path(p).name: _sha256(Path(p).read_bytes()) for p in sorted(paths)}
