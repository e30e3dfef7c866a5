"""Command line entry point.

    roal run --config PATH [--out DIR] [--seed N] [--repetitions N] [--force]
    roal ablate --config PATH --sweep {lambda,acquisition,initial_labeled} --values LIST
    roal plot-data --run DIR

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 I/O error.
The output directory defaults to $ROAL_OUTPUT_DIR, then [output] directory.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig, parse_config
from .errors import ConfigError, RoalError
from .runner import OUTPUT_ENV, SWEEPS, RunError, emit_plot_data, resolve_output_dir, run_ablation, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("roal")


def _load(path, seed=None, repetitions=None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = parse_config(text)
    exp = cfg.experiment
    if seed is not None:
        exp = dataclasses.replace(exp, base_seed=seed)
    if repetitions is not None:
        if repetitions < 1:
            raise ConfigError("--repetitions must be >= 1")
        exp = dataclasses.replace(exp, repetitions=repetitions)
    return dataclasses.replace(cfg, experiment=exp)


def _cmd_run(args) -> int:
    cfg = _load(args.config, args.seed, args.repetitions)
    out = resolve_output_dir(cfg, args.out)
    run_experiment(cfg, out, force=args.force)
    log.info("wrote %s", out)
    return EXIT_OK


def _cmd_ablate(args) -> int:
    cfg = _load(args.config, args.seed, args.repetitions)
    out = resolve_output_dir(cfg, args.out)
    path = run_ablation(cfg, args.sweep, args.values.split(","), out, force=args.force)
    log.info("wrote %s", path)
    return EXIT_OK


def _cmd_plot(args) -> int:
    for p in emit_plot_data(args.run):
        log.info("wrote %s", p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roal", description=__doc__.split("\n\n")[0],
                                     epilog=f"output directory may be set with ${OUTPUT_ENV}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a multi-seed experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out")
    run.add_argument("--seed", type=int, help="override [experiment] base_seed")
    run.add_argument("--repetitions", type=int)
    run.add_argument("--force", action="store_true", help="overwrite existing results")
    run.set_defaults(func=_cmd_run)

    ab = sub.add_parser("ablate", help="sweep one setting, all else fixed")
    ab.add_argument("--config", required=True)
    ab.add_argument("--sweep", required=True, choices=SWEEPS)
    ab.add_argument("--values", required=True, help="comma-separated values")
    ab.add_argument("--out")
    ab.add_argument("--seed", type=int)
    ab.add_argument("--repetitions", type=int)
    ab.add_argument("--force", action="store_true")
    ab.set_defaults(func=_cmd_ablate)

    plot = sub.add_parser("plot-data", help="emit long-format plot CSVs for a run directory")
    plot.add_argument("--run", required=True)
    plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except RunError as exc:
        if isinstance(exc.__cause__, ConfigError):
            log.error("configuration error: %s", exc)
            return EXIT_CONFIG
        if isinstance(exc.__cause__, OSError):
            log.error("I/O error: %s", exc)
            return EXIT_IO
        log.error("runtime error: %s", exc)
        return EXIT_RUNTIME
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except (RoalError, RuntimeError, ValueError) as exc:
        log.error("runtime error: %s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
