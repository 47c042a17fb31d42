"""Acceptance criteria, one test each.

Every test records a one-line verdict that the conftest terminal summary
prints as ``PASS``/``FAIL criterion N: ...``. The directional criteria (5-7)
read the benchmark produced by ``configs/acceptance.toml`` on the desk archive.
"""

import csv
import filecmp
import time

import numpy as np
import pytest

from probesel.evaluation import (
    Protocol,
    ks_statistic,
    make_splits,
    parse_heatmap_csv,
    threshold_counts,
)
from probesel.primitives.distances import dtw_distance
from probesel.primitives.features import interval_features, summary_stats

from conftest import ACCEPTANCE_CONFIG, only_subdir, run_cli

VERDICTS = {}
DETAILS = []

SOURCES = ("CMAES", "DE", "PSO", "ALL")
GENERATIONS = (2, 7)
KINDS = ("best", "current")


def record(n, ok, detail):
    VERDICTS[n] = (bool(ok), detail)
    assert ok, detail


def _configs(kind):
    return [f"{s.lower()}-{kind}-g{g}" for s in SOURCES for g in GENERATIONS]


def _tidy(bench):
    with open(bench / "accuracy_tidy.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def _acc(rows, model, traj, protocol):
    return np.array([float(r["accuracy"]) for r in rows
                     if r["model"] == model and r["trajectory"] == traj and r["protocol"] == protocol])


@pytest.fixture(scope="module")
def tidy(acceptance_run):
    return _tidy(acceptance_run["benchmark"])


def test_criterion_1_split_arithmetic(desk_datasets):
    t0 = time.perf_counter()
    ds = desk_datasets["cmaes-best-g2"]
    loio = [(len(p.train_indices), len(p.test_indices)) for p in make_splits(ds, Protocol.LOIO)]
    lopo = [(len(p.train_indices), len(p.test_indices)) for p in make_splits(ds, Protocol.LOPO)]
    elapsed = time.perf_counter() - t0
    ok = loio == [(480, 120)] * 5 and lopo == [(575, 25)] * 24 and elapsed < 1.0
    record(1, ok, f"LOIO {len(loio)} folds {set(loio)}, LOPO {len(lopo)} folds {set(lopo)}, "
                  f"{elapsed:.3f} s")


def test_criterion_2_trajectory_lengths(desk_datasets):
    t0 = time.perf_counter()
    lengths = {n: desk_datasets[n].length for n in ("cmaes-current-g7", "all-current-g7", "all-best-g7")}
    bad = []
    for name, ds in desk_datasets.items():
        if "-best-" not in name:
            continue
        g = int(name.rsplit("g", 1)[1])
        if name.startswith("all"):
            cuts = np.cumsum([0, 10 * g, 30 * g, 40 * g])
        else:
            cuts = [0, ds.length]
        for lo, hi in zip(cuts, cuts[1:]):
            if np.any(np.diff(ds.series[:, lo:hi], axis=1) > 0):
                bad.append(name)
    elapsed = time.perf_counter() - t0
    ok = (lengths == {"cmaes-current-g7": 70, "all-current-g7": 560, "all-best-g7": 560}
          and not bad and elapsed < 1.0)
    record(2, ok, f"lengths {lengths}, increasing best series in {bad or 'none'}, {elapsed:.3f} s")


def test_criterion_3_dummy_semantics(tidy, desk_datasets):
    wrong = []
    checked = 0
    for r in (r for r in tidy if r["model"] == "Dummy"):
        ds = desk_datasets[r["trajectory"]]
        plan = next(p for p in make_splits(ds, r["protocol"]) if p.held_out == int(r["held_out"]))
        vals, counts = np.unique(ds.labels[plan.train_indices], return_counts=True)
        mode = vals[np.argmax(counts)]
        test = ds.labels[plan.test_indices]
        if r["protocol"] == "LOPO":
            expected = 1.0 if ds.label_table[plan.held_out] == mode else 0.0
        else:
            expected = float(np.count_nonzero(test == mode)) / len(test)
        checked += 1
        if float(r["accuracy"]) != expected:
            wrong.append((r["trajectory"], r["protocol"], r["held_out"]))
    record(3, checked > 0 and not wrong, f"{checked} Dummy folds checked, {len(wrong)} mismatches")


def _dtw_brute(a, b):
    """Minimum squared-cost warping path by explicit enumeration of all paths."""
    n, m = len(a), len(b)
    best = np.inf

    def walk(i, j, cost):
        nonlocal best
        cost += (a[i] - b[j]) ** 2
        if cost >= best:
            return
        if i == n - 1 and j == m - 1:
            best = cost
            return
        if i + 1 < n:
            walk(i + 1, j, cost)
        if j + 1 < m:
            walk(i, j + 1, cost)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, cost)

    walk(0, 0, 0.0)
    return best


def _ks_sweep(a, b):
    return max(abs(np.mean(a <= x) - np.mean(b <= x)) for x in np.concatenate([a, b]))


def test_criterion_4_oracles():
    rng = np.random.default_rng(44)
    dtw_err = 0.0
    for _ in range(250):
        a = rng.normal(size=int(rng.integers(1, 8)))
        b = rng.normal(size=int(rng.integers(1, 8)))
        dtw_err = max(dtw_err, abs(dtw_distance(a, b) - _dtw_brute(a, b)))
    ks_err = 0.0
    for _ in range(50):
        a = np.round(rng.normal(size=int(rng.integers(5, 60))), 1)
        b = np.round(rng.normal(0.5, 1.0, size=int(rng.integers(5, 60))), 1)
        ks_err = max(ks_err, abs(ks_statistic(a, b)[0] - _ks_sweep(a, b)))
    slope_err = 0.0
    for _ in range(200):
        m = int(rng.integers(3, 80))
        x = rng.normal(size=m)
        s = int(rng.integers(0, m - 2))
        L = int(rng.integers(3, m - s + 1))
        t = np.arange(s, s + L)
        w = x[s:s + L]
        closed = np.sum((t - t.mean()) * (w - w.mean())) / np.sum((t - t.mean()) ** 2)
        slope_err = max(slope_err, abs(interval_features(x, s, L)[2] - closed))
    q = summary_stats([1, 2, 3, 4], (), [0.25]).values[0]
    ok = dtw_err <= 1e-9 and ks_err <= 1e-9 and slope_err <= 1e-9 and abs(q - 1.75) <= 1e-9
    record(4, ok, f"max |err|: DTW {dtw_err:.1e} (250 pairs), KS {ks_err:.1e}, "
                  f"slope {slope_err:.1e}; q0.25([1,2,3,4]) = {q}")


def _medians(tidy, model, kind):
    return {c: float(np.median(_acc(tidy, model, c, "LOIO"))) for c in _configs(kind)}


def test_criterion_5_feature_and_interval_models(tidy):
    summary_line, strict, ok = [], [], True
    for kind in KINDS:
        dummy, knn = _medians(tidy, "Dummy", kind), _medians(tidy, "KNN", kind)
        for model in ("Summary", "TSF"):
            med = _medians(tidy, model, kind)
            wins = [c for c in med if med[c] - dummy[c] >= 0.10 - 1e-12 and med[c] > knn[c]]
            margin = [c for c in med if med[c] - dummy[c] >= 0.10 - 1e-12]
            beats = [c for c in med if med[c] > knn[c]]
            ok &= len(wins) >= 6
            summary_line.append(f"{model}/{kind} {len(wins)}/8")
            strict.append(f"{model}/{kind} margin {len(margin)}/8 >KNN {len(beats)}/8")
            DETAILS.append(f"criterion 5 {model}/{kind}: " + ", ".join(
                f"{c} {med[c]:.3f} (Dummy {dummy[c]:.3f}, KNN {knn[c]:.3f})" for c in med))
    record(5, ok, "configs with +10pp over Dummy and > KNN (median LOIO): "
                  + ", ".join(summary_line) + " | " + "; ".join(strict))


def test_criterion_6_tuning_helps(tidy):
    parts, ok = [], True
    for kind in KINDS:
        for model in ("Summary", "TSF"):
            better = []
            for c in _configs(kind):
                tuned = _acc(tidy, f"{model}-tuned", c, "LOIO").mean()
                default = _acc(tidy, model, c, "LOIO").mean()
                DETAILS.append(f"criterion 6 {model}/{c}: tuned {tuned:.4f} default {default:.4f}")
                if tuned >= default:
                    better.append(c)
            ok &= len(better) >= 6
            parts.append(f"{model}-tuned/{kind} {len(better)}/8")
    record(6, ok, "configs with tuned mean LOIO >= default: " + ", ".join(parts))


def test_criterion_7_lopo_is_harder(tidy):
    parts, ok = [], True
    lopo = {(r["model"], r["trajectory"]) for r in tidy if r["protocol"] == "LOPO"}
    for model, traj in sorted(lopo):
        if model == "Dummy":
            continue
        a_lopo = _acc(tidy, model, traj, "LOPO").mean()
        a_loio = _acc(tidy, model, traj, "LOIO").mean()
        ok &= a_lopo < a_loio
        parts.append(f"{model} {a_lopo:.3f}<{a_loio:.3f}" if a_lopo < a_loio
                     else f"{model} {a_lopo:.3f}>={a_loio:.3f}")
    record(7, ok and bool(parts), f"mean LOPO vs LOIO on {sorted({t for _, t in lopo})}: "
                                  + ", ".join(parts))


def test_criterion_8_determinism(acceptance_run, tmp_path_factory):
    out = tmp_path_factory.mktemp("second")
    assert run_cli("generate", "--out", out) == 0
    archive = only_subdir(out / "generate")
    assert run_cli("benchmark", "--config", ACCEPTANCE_CONFIG, "--archive", archive, "--out", out) == 0
    bench = only_subdir(out / "benchmark")
    assert run_cli("report", "--config", ACCEPTANCE_CONFIG, "--benchmark", bench, "--out", out) == 0
    report = only_subdir(out / "report")
    pairs = [(acceptance_run["benchmark"], bench), (acceptance_run["report"], report)]
    names, diff = 0, []
    for first, second in pairs:
        files = sorted(p.name for p in first.glob("*.csv"))
        assert files == sorted(p.name for p in second.glob("*.csv"))
        for name in files:
            names += 1
            if not filecmp.cmp(first / name, second / name, shallow=False):
                diff.append(name)
    for name in ("runs.jsonl", "labels.jsonl", "instances.json"):
        names += 1
        if not filecmp.cmp(acceptance_run["archive"] / name, archive / name, shallow=False):
            diff.append(name)
    record(8, not diff, f"{names} files compared across two pipeline executions, "
                        f"differing: {diff or 'none'}")


def test_criterion_9_threshold_counts_from_csv(acceptance_run):
    bench, report = acceptance_run["benchmark"], acceptance_run["report"]
    heatmaps = sorted(bench.glob("lopo_heatmap_*.csv"))
    mismatched = []
    for hm_path in heatmaps:
        traj = hm_path.stem[len("lopo_heatmap_"):]
        # independent recount straight from the CSV text
        with open(hm_path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        per_model = {r[0]: (sum(float(v) >= 0.9 for v in r[1:]), sum(float(v) <= 0.1 for v in r[1:]))
                     for r in body}
        per_function = {h: (sum(float(r[k]) >= 0.9 for r in body), sum(float(r[k]) <= 0.1 for r in body))
                        for k, h in enumerate(header[1:], start=1)}
        tc = threshold_counts(parse_heatmap_csv(hm_path.read_text(), traj))
        if tc.per_model != per_model or {f"F{u}": v for u, v in tc.per_function.items()} != per_function:
            mismatched.append(f"{traj} (recount)")
        for name in (f"threshold_models_{traj}.csv", f"threshold_functions_{traj}.csv"):
            if not filecmp.cmp(bench / name, report / name, shallow=False):
                mismatched.append(name)
        if (bench / f"threshold_models_{traj}.csv").read_text() != tc.model_csv():
            mismatched.append(f"threshold_models_{traj}.csv (pipeline)")
    record(9, heatmaps and not mismatched,
           f"{len(heatmaps)} LOPO heatmaps recounted, mismatches: {mismatched or 'none'}")
