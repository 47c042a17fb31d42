"""Session fixtures shared by the slow tests.

The desk archive is the full default configuration (24 functions, 5
instances, 5 runs, 3 optimizers). Generating it takes a few minutes on one
core, so it is built once per session. Set ``PROBESEL_DESK_ARCHIVE`` to an
existing ``generate`` output directory to reuse it.
"""

import os
from pathlib import Path

import pytest

from probesel.cli import main
from probesel.config import ExperimentConfig
from probesel.pipeline import build_datasets, load_archive

ROOT = Path(__file__).resolve().parent.parent
ACCEPTANCE_CONFIG = ROOT / "configs" / "acceptance.toml"


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def only_subdir(path: Path) -> Path:
    dirs = sorted(p for p in path.iterdir() if p.is_dir())
    assert len(dirs) == 1, dirs
    return dirs[0]


@pytest.fixture(scope="session")
def desk_archive(tmp_path_factory) -> Path:
    reuse = os.environ.get("PROBESEL_DESK_ARCHIVE")
    if reuse:
        return Path(reuse)
    out = tmp_path_factory.mktemp("desk")
    assert run_cli("generate", "--out", out) == 0
    return only_subdir(out / "generate")


@pytest.fixture(scope="session")
def desk_datasets(desk_archive) -> dict:
    cfg = ExperimentConfig()
    probes, longs = load_archive(cfg, desk_archive)
    return build_datasets(cfg, probes, longs)[1]


@pytest.fixture(scope="session")
def desk_labels(desk_archive) -> dict:
    cfg = ExperimentConfig()
    probes, longs = load_archive(cfg, desk_archive)
    return build_datasets(cfg, probes, longs)[0]


@pytest.fixture(scope="session")
def acceptance_run(desk_archive, tmp_path_factory) -> dict:
    """Benchmark and report of the acceptance roster on the desk archive."""
    out = tmp_path_factory.mktemp("acceptance")
    assert run_cli("benchmark", "--config", ACCEPTANCE_CONFIG, "--archive", desk_archive,
                   "--out", out) == 0
    bench = only_subdir(out / "benchmark")
    assert run_cli("report", "--config", ACCEPTANCE_CONFIG, "--benchmark", bench,
                   "--out", out) == 0
    return {"root": out, "archive": desk_archive, "benchmark": bench,
            "report": only_subdir(out / "report")}


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(mod.VERDICTS):
        ok, detail = mod.VERDICTS[n]
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    if mod.DETAILS:
        tr.section("acceptance details")
        for line in mod.DETAILS:
            tr.write_line(line)
