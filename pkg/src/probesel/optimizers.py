"""CMA-ES, DE and PSO runners that log every objective evaluation in order.

Each optimizer evaluates one whole generation at a time; the values of a
generation are appended to the log in population index order, so a run of
``budget`` evaluations always consists of ``budget // population_size``
consecutive blocks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .problems import LOWER_BOUND, UPPER_BOUND, ProblemInstance, evaluate_batch

__all__ = [
    "Algorithm",
    "OptimizerConfig",
    "RunRecord",
    "DEFAULT_POPULATION",
    "run_optimizer",
    "run_long",
    "write_archive",
    "read_archive",
]


class Algorithm(str, Enum):
    CMAES = "CMAES"
    DE = "DE"
    PSO = "PSO"

    def __str__(self) -> str:
        return self.value


ALGORITHM_ORDER = (Algorithm.CMAES, Algorithm.DE, Algorithm.PSO)

DEFAULT_POPULATION = {Algorithm.CMAES: 10, Algorithm.DE: 30, Algorithm.PSO: 40}

_DEFAULT_PARAMS = {
    Algorithm.CMAES: {"sigma0": 2.0},
    Algorithm.DE: {"F": 0.5, "CR": 0.9},
    Algorithm.PSO: {"w": 0.729, "c1": 1.49445, "c2": 1.49445},
}


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings of one optimizer run.

    ``params`` holds algorithm-specific settings (CMA-ES ``sigma0``; DE ``F`` and
    ``CR``; PSO ``w``, ``c1``, ``c2``); missing keys take the defaults.
    """

    algorithm: Algorithm
    budget_evaluations: int
    rng_seed: int = 0
    population_size: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if self.population_size is None:
            object.__setattr__(self, "population_size", DEFAULT_POPULATION[self.algorithm])
        merged = {**_DEFAULT_PARAMS[self.algorithm], **self.params}
        unknown = set(merged) - set(_DEFAULT_PARAMS[self.algorithm])
        if unknown:
            raise ValueError(f"unknown {self.algorithm} parameters: {sorted(unknown)}")
        object.__setattr__(self, "params", merged)

    def validate(self) -> None:
        pop = self.population_size
        if pop < 1 or (self.algorithm is Algorithm.DE and pop < 4):
            raise ValueError(f"population_size {pop} too small for {self.algorithm}")
        if self.algorithm is Algorithm.CMAES and pop < 2:
            raise ValueError("CMA-ES needs at least 2 offspring")
        if self.budget_evaluations < pop or self.budget_evaluations % pop:
            raise ValueError(
                f"budget_evaluations ({self.budget_evaluations}) must be a positive "
                f"multiple of population_size ({pop})"
            )
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be unsigned")


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Objective values of one run, in evaluation order.

    ``f_opt`` and ``population_size`` are carried along so that target
    precision (``best_final - f_opt``) and generation boundaries can be
    recovered from the record alone.
    """

    algorithm: Algorithm
    function_id: int
    instance_id: int
    run_index: int
    evals: np.ndarray
    population_size: int
    seed: int = 0
    f_opt: float = 0.0
    dimension: int = 0

    @property
    def best_final(self) -> float:
        return float(np.min(self.evals))

    @property
    def budget(self) -> int:
        return int(self.evals.shape[0])

    @property
    def key(self) -> tuple:
        return (self.function_id, self.instance_id, self.run_index)

    def truncated(self, n: int) -> "RunRecord":
        if n > self.budget:
            raise ValueError("cannot truncate a run beyond its length")
        return replace(self, evals=_frozen(self.evals[:n]))

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm.value,
            "function_id": self.function_id,
            "instance_id": self.instance_id,
            "run_index": self.run_index,
            "population_size": self.population_size,
            "seed": self.seed,
            "dimension": self.dimension,
            "f_opt": self.f_opt,
            "best_final": self.best_final,
            "evals": self.evals.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(
            algorithm=Algorithm(d["algorithm"]),
            function_id=int(d["function_id"]),
            instance_id=int(d["instance_id"]),
            run_index=int(d["run_index"]),
            evals=_frozen(np.asarray(d["evals"], dtype=np.float64)),
            population_size=int(d["population_size"]),
            seed=int(d.get("seed", 0)),
            f_opt=float(d.get("f_opt", 0.0)),
            dimension=int(d.get("dimension", 0)),
        )


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------


class _Logger:
    def __init__(self, instance: ProblemInstance, budget: int):
        self.instance = instance
        self.values = np.empty(budget)
        self.n = 0

    def __call__(self, X: np.ndarray) -> np.ndarray:
        f = evaluate_batch(self.instance, X)
        self.values[self.n : self.n + f.shape[0]] = f
        self.n += f.shape[0]
        return f


def _clip(X):
    return np.clip(X, LOWER_BOUND, UPPER_BOUND)


def _cmaes(config, instance, rng, evaluate, n_generations):
    d = instance.dimension
    lam = config.population_size
    mu = lam // 2
    weights = math.log((lam + 1) / 2) - np.log(np.arange(1, mu + 1))
    weights /= weights.sum()
    mueff = 1.0 / np.sum(weights**2)

    cc = (4 + mueff / d) / (d + 4 + 2 * mueff / d)
    cs = (mueff + 2) / (d + mueff + 5)
    c1 = 2 / ((d + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((d + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (d + 1)) - 1) + cs
    chi_n = math.sqrt(d) * (1 - 1 / (4 * d) + 1 / (21 * d**2))

    mean = rng.uniform(LOWER_BOUND, UPPER_BOUND, d)
    sigma = float(config.params["sigma0"])
    C = np.eye(d)
    B = np.eye(d)
    D = np.ones(d)
    pc = np.zeros(d)
    ps = np.zeros(d)

    for gen in range(1, n_generations + 1):
        Z = rng.standard_normal((lam, d))
        X = _clip(mean + sigma * (Z * D) @ B.T)
        f = evaluate(X)
        order = np.argsort(f, kind="stable")[:mu]

        old = mean
        mean = weights @ X[order]
        step = (mean - old) / sigma
        invsqrt = B @ np.diag(1 / D) @ B.T
        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * (invsqrt @ step)
        hsig = np.linalg.norm(ps) / math.sqrt(1 - (1 - cs) ** (2 * gen)) < (1.4 + 2 / (d + 1)) * chi_n
        pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * step

        Y = (X[order] - old) / sigma
        C = (
            (1 - c1 - cmu) * C
            + c1 * (np.outer(pc, pc) + (not hsig) * cc * (2 - cc) * C)
            + cmu * (Y.T * weights) @ Y
        )
        sigma *= math.exp((cs / damps) * (np.linalg.norm(ps) / chi_n - 1))
        sigma = min(sigma, 1e3)

        C = np.triu(C) + np.triu(C, 1).T
        eigvals, B = np.linalg.eigh(C)
        D = np.sqrt(np.maximum(eigvals, 1e-300))


def _de(config, instance, rng, evaluate, n_generations):
    d = instance.dimension
    n = config.population_size
    F, CR = float(config.params["F"]), float(config.params["CR"])
    pop = rng.uniform(LOWER_BOUND, UPPER_BOUND, (n, d))
    fit = evaluate(pop)
    idx = np.arange(n)
    for _ in range(n_generations - 1):
        # three distinct donors per target, all different from the target
        keys = rng.random((n, n))
        keys[idx, idx] = np.inf
        donors = np.argsort(keys, axis=1)[:, :3]
        mutant = pop[donors[:, 0]] + F * (pop[donors[:, 1]] - pop[donors[:, 2]])
        cross = rng.random((n, d)) < CR
        cross[idx, rng.integers(0, d, n)] = True
        trial = _clip(np.where(cross, mutant, pop))
        f_trial = evaluate(trial)
        better = f_trial <= fit
        pop[better] = trial[better]
        fit[better] = f_trial[better]


def _pso(config, instance, rng, evaluate, n_generations):
    d = instance.dimension
    n = config.population_size
    w, c1, c2 = (float(config.params[k]) for k in ("w", "c1", "c2"))
    vmax = 0.5 * (UPPER_BOUND - LOWER_BOUND)
    pos = rng.uniform(LOWER_BOUND, UPPER_BOUND, (n, d))
    vel = rng.uniform(-vmax, vmax, (n, d))
    fit = evaluate(pos)
    pbest, pbest_f = pos.copy(), fit.copy()
    g = int(np.argmin(pbest_f))
    for _ in range(n_generations - 1):
        r1 = rng.random((n, d))
        r2 = rng.random((n, d))
        vel = w * vel + c1 * r1 * (pbest - pos) + c2 * r2 * (pbest[g] - pos)
        vel = np.clip(vel, -vmax, vmax)
        pos = _clip(pos + vel)
        fit = evaluate(pos)
        improved = fit < pbest_f
        pbest[improved] = pos[improved]
        pbest_f[improved] = fit[improved]
        g = int(np.argmin(pbest_f))


_RUNNERS = {Algorithm.CMAES: _cmaes, Algorithm.DE: _de, Algorithm.PSO: _pso}


def run_optimizer(
    config: OptimizerConfig, instance: ProblemInstance, run_index: int = 0
) -> RunRecord:
    """Run ``config`` on ``instance`` for exactly ``config.budget_evaluations`` evaluations.

    The run is a pure function of ``(config, instance)``: the same seed always
    reproduces the same evaluation log, and a shorter budget yields a prefix of
    a longer one.
    """
    config.validate()
    budget = config.budget_evaluations
    log = _Logger(instance, budget)
    rng = np.random.default_rng(config.rng_seed)
    _RUNNERS[config.algorithm](config, instance, rng, log, budget // config.population_size)
    assert log.n == budget
    return RunRecord(
        algorithm=config.algorithm,
        function_id=instance.function_id,
        instance_id=instance.instance_id,
        run_index=run_index,
        evals=_frozen(log.values),
        population_size=config.population_size,
        seed=config.rng_seed,
        f_opt=instance.f_opt,
        dimension=instance.dimension,
    )


def run_long(
    config: OptimizerConfig, instance: ProblemInstance, label_budget: int, run_index: int = 0
) -> RunRecord:
    """Labelling run: ``label_budget`` rounded down to whole generations."""
    pop = config.population_size
    if label_budget < pop:
        raise ValueError(f"label_budget ({label_budget}) is below population_size ({pop})")
    budget = (label_budget // pop) * pop
    return run_optimizer(replace(config, budget_evaluations=budget), instance, run_index)


def write_archive(records, path) -> None:
    """One JSON object per line; floats are written as shortest round-trip decimals."""
    path = Path(path)
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), separators=(",", ":")))
            fh.write("\n")


def read_archive(path) -> list[RunRecord]:
    with Path(path).open() as fh:
        return [RunRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
