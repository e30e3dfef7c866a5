"""Multi-seed experiment execution and result files."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, serialize_config, validate_config
from .data import Dataset, load_idx, make_blobs_split, split_pool
from .errors import ConfigError, RoalError
from .loop import IterationRecord, forgetting_probe, run_roal
from .metrics import aggregate

OUTPUT_ENV = "ROAL_OUTPUT_DIR"

RUN_COLUMNS = ("run_id", "iteration", "attack", "labeled_count", "clean_accuracy",
               "robust_accuracy", "train_loss", "seed")
PROBE_COLUMNS = ("run_id", "iteration", "attack", "previous_attack",
                 "previous_attack_robust_accuracy", "forgetting_drop")
AGG_METRICS = ("clean_accuracy", "robust_accuracy", "train_loss", "forgetting_drop")
PLOT_METRICS = ("accuracy", "robust_accuracy", "forgetting_drop")
SWEEPS = ("lambda", "acquisition", "initial_labeled")


class RunError(RoalError, RuntimeError):
    def __init__(self, run_index: int, cause: Exception):
        super().__init__(f"run {run_index} failed: {cause}")
        self.run_index = run_index


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or not np.isfinite(x):
        return ""
    return f"{float(x):.6g}"


def load_datasets(cfg: ExperimentConfig, seed: int) -> tuple[Dataset, Dataset]:
    d = cfg.dataset
    if d.name == "blobs":
        train, test = make_blobs_split(d.n_train, d.n_test, d.num_classes, d.dim, d.spread, seed)
    else:
        train = load_idx(d.train_images, d.train_labels, name=d.name)
        test = load_idx(d.test_images, d.test_labels, name=d.name)
    if d.limit_train and d.limit_train < len(train):
        train = train.subset(np.sort(np.random.default_rng(seed).choice(len(train), d.limit_train, replace=False)))
    if d.limit_test and d.limit_test < len(test):
        test = test.subset(np.sort(np.random.default_rng(seed + 1).choice(len(test), d.limit_test, replace=False)))
    return train, test


def run_single(cfg: ExperimentConfig, run_index: int) -> list[IterationRecord]:
    seed = cfg.base_seed + run_index
    data_seed = seed if cfg.dataset.seed is None else cfg.dataset.seed
    train, test = load_datasets(cfg, data_seed)
    pool = split_pool(train, test, cfg.loop.initial_labeled, seed)
    model_cfg = cfg.model_config(train.input_dim, train.num_classes)
    return run_roal(pool, model_cfg, cfg.loop_config(), seed)


def _run_indexed(args):
    cfg, r = args
    try:
        return run_single(cfg, r)
    except Exception as exc:  # noqa: BLE001 - re-raised with the run index
        raise RunError(r, exc) from exc


def execute_runs(cfg: ExperimentConfig) -> list[list[IterationRecord]]:
    jobs = [(cfg, r) for r in range(cfg.repetitions)]
    workers = min(cfg.experiment.workers, len(jobs))
    if workers <= 1:
        return [_run_indexed(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_indexed, jobs))


def run_csv_text(run_id: int, records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for r in records:
        w.writerow([run_id, r.iteration, r.attack_name, r.labeled_count, fmt(r.clean_accuracy),
                    fmt(r.robust_accuracy), fmt(r.train_loss), r.seed])
    return buf.getvalue()


def probe_csv_text(run_id: int, records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROBE_COLUMNS)
    drops = forgetting_probe(records)
    for i in range(1, len(records)):
        r = records[i]
        w.writerow([run_id, r.iteration, r.attack_name, records[i - 1].attack_name,
                    fmt(r.prev_attack_robust_accuracy), fmt(drops[i - 1])])
    return buf.getvalue()


def _rows_for_aggregate(records):
    drops = forgetting_probe(records)
    rows = []
    for i, r in enumerate(records):
        rows.append({
            "clean_accuracy": r.clean_accuracy,
            "robust_accuracy": r.robust_accuracy,
            "train_loss": r.train_loss,
            "forgetting_drop": drops[i - 1] if i > 0 else float("nan"),
        })
    return rows


def aggregate_csv_text(runs, initial_labeled: int, candidates: int) -> str:
    summary = aggregate([_rows_for_aggregate(r) for r in runs], AGG_METRICS)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["iteration", "attack", "queries", "repetitions"]
    for m in AGG_METRICS:
        header += [f"{m}_mean", f"{m}_std"]
    w.writerow(header)
    for i, rec in enumerate(runs[0]):
        row = [rec.iteration, rec.attack_name, initial_labeled + rec.iteration * candidates, summary.repetitions]
        for m in AGG_METRICS:
            row += [fmt(summary.mean[m][i]), fmt(summary.std[m][i])]
        w.writerow(row)
    return buf.getvalue()


def resolve_output_dir(cfg: ExperimentConfig, out=None) -> Path:
    if out:
        return Path(out)
    if os.environ.get(OUTPUT_ENV):
        return Path(os.environ[OUTPUT_ENV])
    return Path(cfg.output.directory)


def _prepare_dir(out_dir: Path, force: bool):
    if (out_dir / "manifest.json").exists() and not force:
        raise FileExistsError(f"{out_dir} already holds results; pass --force to overwrite")
    out_dir.mkdir(parents=True, exist_ok=True)


def run_experiment(cfg: ExperimentConfig, out_dir, force: bool = False) -> int:
    """Run every repetition and write run_XXX.csv, aggregate.csv and manifest.json."""
    out_dir = Path(out_dir)
    _prepare_dir(out_dir, force)
    start = time.perf_counter()
    runs = execute_runs(cfg)
    elapsed = time.perf_counter() - start
    files = []
    if "csv" in cfg.output.formats:
        for r, records in enumerate(runs):
            (out_dir / f"run_{r:03d}.csv").write_text(run_csv_text(r, records))
            (out_dir / f"run_{r:03d}_probe.csv").write_text(probe_csv_text(r, records))
            files += [f"run_{r:03d}.csv", f"run_{r:03d}_probe.csv"]
    (out_dir / "aggregate.csv").write_text(
        aggregate_csv_text(runs, cfg.loop.initial_labeled, cfg.loop.candidates_per_iter))
    files.append("aggregate.csv")
    manifest = {
        "method": cfg.method,
        "library_version": __version__,
        "repetitions": cfg.repetitions,
        "seeds": [cfg.base_seed + r for r in range(cfg.repetitions)],
        "initial_labeled": cfg.loop.initial_labeled,
        "candidates_per_iter": cfg.loop.candidates_per_iter,
        "files": files,
        "wall_clock_seconds": elapsed,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "config": serialize_config(cfg),
    }
    if "json" in cfg.output.formats:
        manifest["records"] = [[dataclasses.asdict(rec) for rec in run] for run in runs]
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default))
    return 0


def _json_default(x):
    if isinstance(x, float) and not np.isfinite(x):
        return None
    raise TypeError(type(x))


def emit_plot_data(run_dir) -> list[Path]:
    """Long-format (method, queries, mean, std) CSVs, one per metric."""
    run_dir = Path(run_dir)
    agg_path = run_dir / "aggregate.csv"
    if not agg_path.exists():
        raise FileNotFoundError(f"no aggregate.csv in {run_dir}")
    method = "RoAL"
    manifest = run_dir / "manifest.json"
    if manifest.exists():
        method = json.loads(manifest.read_text()).get("method", method)
    with agg_path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    source = {"accuracy": "clean_accuracy", "robust_accuracy": "robust_accuracy",
              "forgetting_drop": "forgetting_drop"}
    written = []
    for metric in PLOT_METRICS:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "queries", "mean", "std"])
        for row in rows:
            mean = row[f"{source[metric]}_mean"]
            if mean == "":
                continue
            w.writerow([method, row["queries"], mean, row[f"{source[metric]}_std"]])
        path = run_dir / f"plot_{metric}.csv"
        path.write_text(buf.getvalue())
        written.append(path)
    return written


def _swept(cfg: ExperimentConfig, sweep: str, value: str) -> ExperimentConfig:
    try:
        if sweep == "lambda":
            loop = dataclasses.replace(cfg.loop, lam=float(value))
        elif sweep == "acquisition":
            loop = dataclasses.replace(cfg.loop, strategy=value.strip())
        elif sweep == "initial_labeled":
            loop = dataclasses.replace(cfg.loop, initial_labeled=int(value))
        else:
            raise ConfigError(f"unknown sweep {sweep!r}; choose from {', '.join(SWEEPS)}")
    except ValueError as exc:
        raise ConfigError(f"sweep {sweep}: bad value {value!r}: {exc}") from None
    out = dataclasses.replace(cfg, loop=loop)
    validate_config(out)
    return out


def run_ablation(cfg: ExperimentConfig, sweep: str, values, out_dir, force: bool = False) -> Path:
    """One full experiment per sweep value, seed-matched, plus a wide robust-accuracy table."""
    values = [str(v).strip() for v in values if str(v).strip()]
    if not values:
        raise ConfigError("ablation needs at least one sweep value")
    if sweep not in SWEEPS:
        raise ConfigError(f"unknown sweep {sweep!r}; choose from {', '.join(SWEEPS)}")
    out_dir = Path(out_dir)
    configs = [_swept(cfg, sweep, v) for v in values]
    out_dir.mkdir(parents=True, exist_ok=True)
    table = []
    header = None
    for value, sub_cfg in zip(values, configs):
        sub = out_dir / f"{sweep}={value}"
        run_experiment(sub_cfg, sub, force)
        with (sub / "aggregate.csv").open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        if header is None:
            header = [sweep] + [f"{r['iteration']}:{r['attack']}" for r in rows]
        table.append([value] + [r["robust_accuracy_mean"] for r in rows])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(table)
    path = out_dir / f"ablation_{sweep}.csv"
    path.write_text(buf.getvalue())
    return path
