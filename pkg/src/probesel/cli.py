"""Command-line front end.

Subcommands ``generate``, ``benchmark``, ``tune`` and ``report`` each write a
fresh ``<out>/<command>/vNNN`` directory containing their artifacts and the
effective configuration. Exit codes: 0 success, 2 configuration error,
3 incomplete data, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import pipeline
from .classifiers import ClassifierKind
from .config import default_config_text, dump_config, load_config
from .errors import ConfigError, IncompleteDataError

log = logging.getLogger("probesel")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4

TUNABLE = [k.value for k in ClassifierKind if k is not ClassifierKind.DUMMY]


def _config(args):
    overrides = {"master_seed": args.seed, "output_dir": args.out, "workers": args.workers}
    if getattr(args, "archive", None):
        overrides["archive"] = args.archive
    return load_config(args.config, overrides)


def _start(cfg, command):
    out = pipeline.next_version_dir(Path(cfg.output_dir) / command)
    (out / "effective_config.toml").write_text(dump_config(cfg))
    log.info("%s: writing to %s", command, out)
    return out


def _archive_dir(cfg):
    if cfg.archive:
        return Path(cfg.archive)
    return pipeline.latest_version_dir(Path(cfg.output_dir) / "generate", "manifest.json")


def _datasets(cfg, out=None):
    probes, longs = pipeline.load_archive(cfg, _archive_dir(cfg))
    return pipeline.build_datasets(cfg, probes, longs, out)


def _write_labels(path, labels):
    items = [[list(k) if isinstance(k, tuple) else k, v] for k, v in sorted(labels.items())]
    path.write_text(json.dumps(items) + "\n")


def cmd_generate(args) -> int:
    cfg = _config(args)
    out = _start(cfg, "generate")
    t0 = time.perf_counter()
    with pipeline.worker_mapper(cfg.workers) as mapper:
        manifest = pipeline.generate_archive(cfg, out, mapper)
    log.info("generated %d runs in %.1f s", len(manifest["entries"]), time.perf_counter() - t0)
    print(out)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _config(args)
    roster = cfg.roster_specs(Path(args.config).parent if args.config else None)
    probes, longs = pipeline.load_archive(cfg, _archive_dir(cfg))
    out = _start(cfg, "benchmark")
    labels, datasets = pipeline.build_datasets(cfg, probes, longs)
    _write_labels(out / "labels.json", labels)
    t0 = time.perf_counter()
    with pipeline.worker_mapper(cfg.workers) as mapper:
        report = pipeline.benchmark(cfg, datasets, roster, mapper)
    paths = report.write(out)
    (out / "checksums.json").write_text(
        json.dumps(pipeline.report_checksums(paths), indent=1, sort_keys=True) + "\n"
    )
    log.info("benchmark finished in %.1f s", time.perf_counter() - t0)
    print(out)
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _config(args)
    labels, datasets = _datasets(cfg)
    out = _start(cfg, "tune")
    with pipeline.worker_mapper(cfg.workers) as mapper:
        result = pipeline.tune_kind(cfg, args.kind, datasets, args.budget, mapper)
    result.write(out)
    log.info("best %s score %.4f after %d candidates", args.kind, result.best_score,
             result.budget_used)
    print(out)
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _config(args)
    src = Path(args.benchmark) if args.benchmark else pipeline.latest_version_dir(
        Path(cfg.output_dir) / "benchmark", "accuracy_tidy.csv"
    )
    out = _start(cfg, "report")
    pipeline.build_report(src, out)
    (out / "source.txt").write_text(src.name + "\n")
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment config (defaults apply when omitted)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--workers", type=int, help="worker processes (0 = all cores)")
    common.add_argument("--out", help="output root directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="probesel", description="Algorithm selection from probing trajectories."
    )
    parser.add_argument("--print-default-config", action="store_true",
                        help="print the documented default config and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("generate", parents=[common], help="run the optimizers and write the run archive")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("benchmark", parents=[common], help="cross-validate the classifier roster")
    p.add_argument("--archive", help="archive directory (default: latest generate output)")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("tune", parents=[common], help="random-search tuning of one classifier kind")
    p.add_argument("kind", choices=TUNABLE)
    p.add_argument("--budget", type=int, help="number of candidates (default from config)")
    p.add_argument("--archive", help="archive directory (default: latest generate output)")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("report", parents=[common], help="recompute analyses from benchmark CSVs")
    p.add_argument("--benchmark", help="benchmark output directory (default: latest)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_default_config:
        sys.stdout.write(default_config_text())
        return EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IncompleteDataError as exc:
        print(f"incomplete data: {exc}", file=sys.stderr)
        for cell in exc.missing[:50]:
            print(f"  missing: {cell}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"invalid parameter: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        logging.getLogger("probesel").exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
