"""Experiment configuration: TOML in, validated dataclass out, TOML back."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import tomli_w

from .classifiers import PRESETS, ClassifierKind, ClassifierSpec, preset
from .errors import ConfigError
from .optimizers import ALGORITHM_ORDER, DEFAULT_POPULATION
from .trajectories import Kind, Source, TrajectoryConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["RosterEntry", "ExperimentConfig", "load_config", "dump_config", "default_config_text"]


@dataclass
class RosterEntry:
    """One benchmarked model.

    Exactly one of ``preset``, ``kind`` (with optional ``params``) or
    ``spec_file`` (a best-spec JSON written by ``tune``) selects the model.
    ``trajectories`` restricts it to some datasets; empty means all.
    """

    name: str
    preset: str = ""
    kind: str = ""
    params: dict = field(default_factory=dict)
    spec_file: str = ""
    trajectories: list = field(default_factory=list)

    def spec(self, base_dir: Path | None = None) -> ClassifierSpec:
        chosen = [bool(self.preset), bool(self.kind), bool(self.spec_file)]
        if sum(chosen) != 1:
            raise ConfigError(f"roster entry {self.name!r}: set exactly one of preset, kind, spec_file")
        try:
            if self.preset:
                return preset(self.preset)
            if self.kind:
                return ClassifierSpec(self.kind, self.params)
            path = Path(self.spec_file)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            data = json.loads(path.read_text())
            return ClassifierSpec.from_dict(data.get("best_spec", data))
        except (ValueError, OSError) as exc:
            raise ConfigError(f"roster entry {self.name!r}: {exc}") from exc


@dataclass
class ExperimentConfig:
    master_seed: int = 2024
    dimension: int = 10
    functions: list = field(default_factory=lambda: list(range(1, 25)))
    instances: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    runs_per_instance: int = 5
    populations: dict = field(
        default_factory=lambda: {a.value: n for a, n in DEFAULT_POPULATION.items()}
    )
    label_budget: int = 10_000
    per_instance_labels: bool = False
    precision_floor: float = 1e-8
    generations: list = field(default_factory=lambda: [2, 7])
    kinds: list = field(default_factory=lambda: ["best", "current"])
    sources: list = field(default_factory=lambda: ["CMAES", "DE", "PSO", "ALL"])
    normalize: bool = False
    protocols: list = field(default_factory=lambda: ["LOIO", "LOPO"])
    lopo_trajectories: list = field(default_factory=lambda: ["cmaes-best-g2"])
    repetitions: int = 10
    roster: list = field(default_factory=lambda: [RosterEntry(n, preset=n) for n in PRESETS])
    tuning_trajectory: str = "cmaes-best-g2"
    tuning_budget: dict = field(
        default_factory=lambda: {"KNN": 200, "Summary": 200, "TSF": 60, "RotationForest": 30}
    )
    output_dir: str = "runs"
    archive: str = ""
    workers: int = 0

    # derived views -------------------------------------------------------

    @property
    def trajectory_configs(self) -> list[TrajectoryConfig]:
        return [
            TrajectoryConfig(Source(s), Kind(k), int(g))
            for s in self.sources
            for k in self.kinds
            for g in self.generations
        ]

    def population(self, algorithm) -> int:
        return int(self.populations[str(algorithm)])

    def roster_specs(self, base_dir: Path | None = None) -> dict:
        """``name -> (spec, trajectory filter or None)``."""
        out = {}
        for e in self.roster:
            if e.name in out:
                raise ConfigError(f"duplicate roster name {e.name!r}")
            out[e.name] = (e.spec(base_dir), list(e.trajectories) or None)
        return out

    def validate(self) -> "ExperimentConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(isinstance(self.master_seed, int) and self.master_seed >= 0, "master_seed must be unsigned")
        need(self.dimension >= 2, "dimension must be >= 2")
        need(self.functions and all(1 <= f <= 24 for f in self.functions), "functions must lie in 1..24")
        need(len(set(self.functions)) == len(self.functions), "functions must be distinct")
        need(self.instances and len(set(self.instances)) == len(self.instances), "instances must be distinct")
        need(all(i >= 1 for i in self.instances), "instance ids must be positive")
        need(self.runs_per_instance >= 1, "runs_per_instance must be >= 1")
        need(set(self.populations) == {a.value for a in ALGORITHM_ORDER},
             "populations needs exactly CMAES, DE and PSO")
        need(self.populations["DE"] >= 4, "DE population must be >= 4")
        need(all(p >= 2 for p in self.populations.values()), "populations must be >= 2")
        need(self.generations and all(isinstance(g, int) and g >= 1 for g in self.generations),
             "generations must be positive integers")
        need(self.label_budget >= max(self.populations.values()) * max(self.generations),
             "label_budget must cover the longest probing run")
        need(self.repetitions >= 1, "repetitions must be >= 1")
        need(self.workers >= 0, "workers must be >= 0 (0 = all cores)")
        try:
            [Kind(k) for k in self.kinds]
            [Source(s) for s in self.sources]
            from .evaluation import Protocol

            [Protocol(p) for p in self.protocols]
            [TrajectoryConfig.parse(t) for t in self.lopo_trajectories]
            TrajectoryConfig.parse(self.tuning_trajectory)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for kind in self.tuning_budget:
            try:
                ClassifierKind(kind)
            except ValueError:
                raise ConfigError(f"unknown classifier kind {kind!r} in tuning_budget") from None
            need(self.tuning_budget[kind] >= 1, "tuning budgets must be >= 1")
        names = [t.name for t in self.trajectory_configs]
        for e in self.roster:
            for t in e.trajectories:
                need(t in names, f"roster entry {e.name!r} names unknown trajectory {t!r}")
        return self

    # (de)serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["roster"] = [
            {k: v for k, v in asdict(e).items() if v not in ("", [], {})} for e in self.roster
        ]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "roster" in d:
            try:
                d["roster"] = [RosterEntry(**e) for e in d["roster"]]
            except TypeError as exc:
                raise ConfigError(f"bad roster entry: {exc}") from exc
        return cls(**d)


def _flatten(doc: dict) -> dict:
    """Merge the ``[experiment]``-style tables of a config file into one dict."""
    flat = {}
    for key, value in doc.items():
        if key == "roster":
            flat["roster"] = value
        elif isinstance(value, dict) and key in _SECTIONS:
            flat.update(value)
        else:
            flat[key] = value
    return flat


_SECTIONS = ("experiment", "runs", "trajectories", "benchmark", "tuning", "output")


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a TOML config (or the defaults) and apply ``overrides``."""
    try:
        doc = tomllib.loads(Path(path).read_text()) if path else {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    flat = _flatten(doc)
    flat.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        cfg = ExperimentConfig.from_dict(flat)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def dump_config(cfg: ExperimentConfig) -> str:
    """Effective configuration as flat TOML; ``load_config`` reads it back unchanged."""
    return tomli_w.dumps(cfg.to_dict())


def default_config_text() -> str:
    return resources.files("probesel").joinpath("default_config.toml").read_text()
