import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from probesel.errors import IncompleteDataError
from probesel.optimizers import Algorithm, RunRecord
from probesel.trajectories import (
    Kind,
    Source,
    TrajectoryConfig,
    all_trajectory,
    best_trajectory,
    build_dataset,
    compute_labels,
    current_trajectory,
    load_dataset,
    save_dataset,
)

POP = {Algorithm.CMAES: 10, Algorithm.DE: 30, Algorithm.PSO: 40}


def record(evals, pop=2, alg=Algorithm.CMAES, f=1, i=1, r=0, f_opt=0.0):
    return RunRecord(alg, f, i, r, np.asarray(evals, dtype=float), pop, f_opt=f_opt)


def test_best_example():
    assert best_trajectory(record([5, 3, 4, 2]), 2).tolist() == [5, 3, 3, 2]


def test_best_of_increasing_is_constant():
    assert best_trajectory(record([1, 2, 3, 4]), 2).tolist() == [1, 1, 1, 1]


def test_best_matches_prefix_min_oracle():
    rng = np.random.default_rng(0)
    evals = rng.normal(size=70)
    got = best_trajectory(record(evals, pop=10), 7)
    assert got.tolist() == [min(evals[: i + 1]) for i in range(70)]


def test_current_examples():
    assert current_trajectory(record([5, 3, 4, 2]), 2).tolist() == [5, 3, 4, 2]
    evals = np.arange(30.0)
    assert current_trajectory(record(evals, pop=10), 1).tolist() == evals[:10].tolist()


@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e9, 1e9)))
def test_best_properties(evals):
    rec = record(evals, pop=1)
    g = len(evals)
    best, cur = best_trajectory(rec, g), current_trajectory(rec, g)
    assert np.all(best <= cur)
    assert np.all(np.diff(best) <= 0)
    # running min of a running min is itself
    assert np.array_equal(best_trajectory(record(best, pop=1), g), best)


def test_insufficient_length():
    with pytest.raises(ValueError):
        best_trajectory(record([1.0, 2.0, 3.0]), 2)
    with pytest.raises(ValueError):
        current_trajectory(record([1.0, 2.0, 3.0]), 2)


def _triple(g, values=(1.0, 2.0, 3.0), key=(1, 1, 0)):
    f, i, r = key
    return [record(np.full(g * POP[a], v), POP[a], a, f, i, r) for a, v in zip(Algorithm, values)]


def test_all_lengths():
    assert len(all_trajectory(*_triple(7), Kind.BEST, 7)) == 560
    assert len(all_trajectory(*_triple(2), Kind.CURRENT, 2)) == 160


def test_all_of_constants_has_three_plateaus():
    s = all_trajectory(*_triple(2), Kind.BEST, 2)
    assert s.tolist() == [1.0] * 20 + [2.0] * 60 + [3.0] * 80


def test_all_rejects_mismatched_runs():
    cma, de, pso = _triple(2)
    other = record(de.evals, 30, Algorithm.DE, f=2)
    with pytest.raises(ValueError):
        all_trajectory(cma, other, pso, Kind.BEST, 2)
    with pytest.raises(ValueError):
        all_trajectory(de, cma, pso, Kind.BEST, 2)


def _long(alg, f, value, i=1, r=0):
    return {"algorithm": alg, "function_id": f, "instance_id": i, "run_index": r,
            "best_final": value, "f_opt": 0.0}


def test_labels_argmin_and_ties():
    runs = [_long("CMAES", 1, 1e-8), _long("DE", 1, 1e-5), _long("PSO", 1, 2e-3),
            _long("CMAES", 2, 0.5), _long("DE", 2, 0.5), _long("PSO", 2, 0.7)]
    assert compute_labels(runs) == {1: "CMAES", 2: "CMAES"}


def test_labels_use_median_and_floor():
    runs = [_long("CMAES", 3, v, r=k) for k, v in enumerate([1e-12, 5.0, 6.0])]
    runs += [_long("DE", 3, v, r=k) for k, v in enumerate([1.0, 2.0, 9.0])]
    runs += [_long("PSO", 3, v, r=k) for k, v in enumerate([1e-10, 1e-11, 8.0])]
    assert compute_labels(runs) == {3: "PSO"}
    # converged to 1e-14 and 1e-13 both fall under the floor, so the tie-break decides
    tie = [_long("CMAES", 4, 1e-14), _long("DE", 4, 1e-13), _long("PSO", 4, 1e-9)]
    assert compute_labels(tie) == {4: "CMAES"}


def test_labels_per_instance_switch():
    runs = [_long(a, 1, v, i=1) for a, v in zip(("CMAES", "DE", "PSO"), (1, 2, 3))]
    runs += [_long(a, 1, v, i=2) for a, v in zip(("CMAES", "DE", "PSO"), (3, 2, 1))]
    assert compute_labels(runs, per_instance=True) == {(1, 1): "CMAES", (1, 2): "PSO"}


def test_labels_missing_algorithm():
    with pytest.raises(IncompleteDataError) as err:
        compute_labels([_long("CMAES", 1, 0.1), _long("DE", 1, 0.2)])
    assert (1, "PSO") in err.value.missing


def _archive(functions=24, instances=5, runs=5, g=2, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for f in range(1, functions + 1):
        for i in range(1, instances + 1):
            for r in range(runs):
                for a in Algorithm:
                    out.append(record(rng.normal(size=g * POP[a]) + f, POP[a], a, f, i, r))
    return out


def test_full_dataset_size_and_labels():
    runs = _archive()
    table = {f: ("CMAES", "DE", "PSO")[f % 3] for f in range(1, 25)}
    for source in Source:
        ds = build_dataset(runs, TrajectoryConfig(source, Kind.BEST, 2), table)
        assert len(ds) == 600
        assert ds.length == {"CMAES": 20, "DE": 60, "PSO": 80, "ALL": 160}[source.value]
        assert all(ds.labels[k] == table[int(ds.function_ids[k])] for k in range(600))
        # ALL joins three running minima, each monotone on its own block
        cuts = [0, 20, 80, 160] if source is Source.ALL else [0, ds.length]
        for lo, hi in zip(cuts, cuts[1:]):
            assert np.all(np.diff(ds.series[:, lo:hi], axis=1) <= 0)


def test_dataset_missing_probe():
    runs = _archive(functions=2, instances=2, runs=1)[:-1]
    with pytest.raises(IncompleteDataError):
        build_dataset(runs, TrajectoryConfig(Source.ALL, Kind.BEST, 2), {1: "DE", 2: "DE"})


def test_dataset_rebuild_and_persistence_bit_exact(tmp_path):
    runs = _archive(functions=3, instances=2, runs=2)
    cfg = TrajectoryConfig.parse("all-current-g2")
    table = {1: "DE", 2: "PSO", 3: "CMAES"}
    ds = build_dataset(runs, cfg, table, seeds={"master_seed": 1})
    again = build_dataset(list(reversed(runs)), cfg, table, seeds={"master_seed": 1})
    assert ds.series.tobytes() == again.series.tobytes()
    save_dataset(ds, tmp_path / "d")
    back = load_dataset(tmp_path / "d")
    assert back.series.tobytes() == ds.series.tobytes()
    assert back.fingerprint() == ds.fingerprint()
    assert back.label_table == table and back.config == cfg


def test_normalize_flag():
    runs = _archive(functions=1, instances=1, runs=1)
    ds = build_dataset(runs, TrajectoryConfig.parse("de-current-g2"), {1: "DE"}, normalize=True)
    assert ds.series.mean() == pytest.approx(0.0, abs=1e-12)


def test_config_names():
    cfg = TrajectoryConfig.parse("cmaes-best-g2")
    assert (cfg.source, cfg.kind, cfg.generations) == (Source.CMAES, Kind.BEST, 2)
    assert cfg.name == "cmaes-best-g2"
    with pytest.raises(ValueError):
        TrajectoryConfig.parse("cmaes-bestest-g2")
