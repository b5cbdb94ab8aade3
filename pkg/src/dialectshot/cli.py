"""Command-line surface: train, adapt, eval, the full dialect matrix, and reports.

Exit codes: 0 on success, 1 on user errors (bad flags, configs, data, or
checkpoints), 2 on internal failures.  Every failure prints a single
machine-parseable line on stderr.  Matrix cells are cached as one CSV per
(task, train, eval, mode, seed, config digest); reports are rebuilt from the
cache, so a completed run regenerates byte-identical files without retraining.
"""

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import (
    ConfigError,
    ExperimentConfig,
    load_experiment_config,
    load_hyperparams,
)
from .data import DatasetError, ShiftConfig, gen_synthetic_shift, load_dataset, save_dataset, split
from .metrics import EvalResult, MetricsError
from .model import classifier_digest
from .numerics import NumericsError
from .reports import (
    build_comparison_report,
    build_gap_report,
    build_matrix_report,
    comparison_to_csv,
    comparison_to_markdown,
    cross_task_to_csv,
    gap_to_csv,
    gap_to_markdown,
    matrix_to_csv,
    matrix_to_markdown,
    parse_matrix_csv,
)
from .shot import ShotError, adapt, evaluate, train_source

USER_ERRORS = (
    ConfigError,
    DatasetError,
    ShotError,
    MetricsError,
    CheckpointError,
    NumericsError,
    FileNotFoundError,
    NotADirectoryError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _write_run_manifest(target: Path, command, digest, seeds):
    manifest = {
        "command": command,
        "config_digest": digest,
        "seeds": seeds,
        "dialectshot_version": __version__,
        "numpy_version": np.__version__,
    }
    if target.is_dir():
        path = target / "run_manifest.json"
    else:
        path = target.with_name(target.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _dict_digest(d):
    import hashlib

    canonical = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def cmd_synth(args):
    cfg = ShiftConfig(
        n=args.n,
        magnitude=args.magnitude,
        kind=args.kind,
        separation=args.separation,
        seed=args.seed,
    )
    source, target = gen_synthetic_shift(cfg)
    out = Path(args.out)
    for ds in (source, target):
        train, evl = split(ds, [0.5, 0.5], seed=cfg.seed)
        save_dataset(train, out / ds.dialect / "train")
        save_dataset(evl, out / ds.dialect / "eval")
    out.mkdir(parents=True, exist_ok=True)
    from dataclasses import asdict

    _write_run_manifest(out, "synth", _dict_digest(asdict(cfg)), [args.seed])
    print(f"wrote {out}/base and {out}/shifted")
    return 0


def cmd_train(args):
    hp = load_hyperparams(args.config, args.seed)
    ds = load_dataset(args.data)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    log = args.log or str(out) + ".log.csv"
    model = train_source(ds, hp, log_path=log)
    save_checkpoint(model, out)
    _write_run_manifest(out, "train", _dict_digest(hp.to_dict()), [hp.seed])
    print(f"trained on {ds.name} ({ds.n} examples), checkpoint at {out}")
    return 0


def cmd_adapt(args):
    hp = load_hyperparams(args.config, args.seed)
    model = load_checkpoint(args.model)
    target = load_dataset(args.data)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    log = args.log or str(out) + ".log.csv"
    adapted = adapt(model, target, hp, log_path=log)
    save_checkpoint(adapted, out)
    _write_run_manifest(out, "adapt", _dict_digest(hp.to_dict()), [hp.seed])
    print(
        f"adapted to {target.name} ({target.n} examples), "
        f"classifier digest {classifier_digest(adapted)[:12]}, checkpoint at {out}"
    )
    return 0


def cmd_eval(args):
    model = load_checkpoint(args.model)
    ds = load_dataset(args.data)
    value = evaluate(model, ds)
    print(f"metric={ds.metric} value={value:.2f} dataset={ds.name} n={ds.n}")
    return 0


def _cell_path(cells_dir: Path, task, train, ev, mode, seed, digest):
    return cells_dir / f"{task}__{train}__{ev}__{mode}__{seed}__{digest[:12]}.csv"


_CELL_FIELDS = ["task", "train", "eval", "mode", "seed", "metric", "value", "error"]


def _write_cell(path: Path, record):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_CELL_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerow(record)
    path.write_text(buf.getvalue())


def _read_cell(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != 1:
        raise ConfigError(f"malformed cell cache file {path}")
    return rows[0]


def _job_cells(task, train, seed, digest, cells_dir):
    """Paths of every cell the (task, train dialect, seed) job produces."""
    out = {}
    for ev in task.dialects:
        out[(ev, "F")] = _cell_path(cells_dir, task.name, train, ev, "F", seed, digest)
        if ev != train:
            out[(ev, "TTA")] = _cell_path(cells_dir, task.name, train, ev, "TTA", seed, digest)
    return out


def _run_matrix_job(cfg: ExperimentConfig, task, train, seed, out_dir: Path, skip_completed):
    """Train once, evaluate everywhere, adapt per off-diagonal dialect.

    Returns a list of cell records; failures become error records so the rest
    of the matrix still runs.
    """
    cells_dir = out_dir / "cells"
    paths = _job_cells(task, train, seed, cfg.digest, cells_dir)
    if skip_completed and all(p.exists() for p in paths.values()):
        return [_read_cell(p) for p in paths.values()]

    records = []
    hp = cfg.hp.with_seed(seed)

    def record(ev, mode, value=None, error=""):
        rec = {
            "task": task.name,
            "train": train,
            "eval": ev,
            "mode": mode,
            "seed": seed,
            "metric": task.metric,
            "value": "" if value is None else repr(float(value)),
            "error": error,
        }
        _write_cell(paths[(ev, mode)], rec)
        records.append(rec)

    model = None
    model_path = out_dir / "models" / f"{task.name}__{train}__{seed}__{cfg.digest[:12]}.ckpt"
    try:
        if skip_completed and model_path.exists():
            model = load_checkpoint(model_path)
        else:
            train_ds = load_dataset(task.path(cfg.base_dir, train, "train"))
            model_path.parent.mkdir(parents=True, exist_ok=True)
            model = train_source(train_ds, hp, log_path=str(model_path) + ".log.csv")
            save_checkpoint(model, model_path)
    except USER_ERRORS as exc:
        for ev, mode in paths:
            record(ev, mode, error=f"training failed: {exc}")
        return records

    for ev in task.dialects:
        try:
            eval_ds = load_dataset(task.path(cfg.base_dir, ev, "eval"))
            record(ev, "F", value=evaluate(model, eval_ds))
        except USER_ERRORS as exc:
            record(ev, "F", error=str(exc))
        if ev == train:
            continue
        try:
            target_ds = load_dataset(task.path(cfg.base_dir, ev, "train"))
            adapted = adapt(model, target_ds, hp)
            eval_ds = load_dataset(task.path(cfg.base_dir, ev, "eval"))
            record(ev, "TTA", value=evaluate(adapted, eval_ds))
        except USER_ERRORS as exc:
            record(ev, "TTA", error=str(exc))
    return records


def _records_to_results(records):
    """Average cached cell values over seeds into EvalResults."""
    by_cell = {}
    errors = []
    for rec in records:
        if rec["error"]:
            errors.append(rec)
            continue
        key = (rec["task"], rec["train"], rec["eval"], rec["mode"], rec["metric"])
        by_cell.setdefault(key, []).append(float(rec["value"]))
    results = [
        EvalResult(
            train_dialect=train,
            eval_dialect=ev,
            task=task,
            mode=mode,
            metric=metric,
            value=float(np.mean(values)),
        )
        for (task, train, ev, mode, metric), values in sorted(by_cell.items())
    ]
    return results, errors


def run_experiment_matrix(cfg: ExperimentConfig, out_dir, skip_completed=False):
    """Execute the full train-by-eval dialect matrix and write report files."""
    out_dir = Path(out_dir)
    (out_dir / "cells").mkdir(parents=True, exist_ok=True)
    jobs = [
        (task, train, seed)
        for task in cfg.tasks
        for train in task.dialects
        for seed in cfg.seeds
    ]
    workers = max(1, int(os.environ.get("DIALECTSHOT_WORKERS", "1")))
    records = []
    if workers == 1:
        for task, train, seed in jobs:
            records.extend(_run_matrix_job(cfg, task, train, seed, out_dir, skip_completed))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_matrix_job, cfg, task, train, seed, out_dir, skip_completed)
                for task, train, seed in jobs
            ]
            for fut in futures:
                records.extend(fut.result())

    results, errors = _records_to_results(records)
    report = build_matrix_report(
        results,
        dialect_order=cfg.dialect_order(),
        task_order=[t.name for t in cfg.tasks],
        cross_task=cfg.cross_task_average,
    )
    report.errors = errors
    (out_dir / "matrix.csv").write_text(matrix_to_csv(report))
    (out_dir / "matrix.md").write_text(matrix_to_markdown(report))
    if cfg.cross_task_average:
        (out_dir / "cross_task.csv").write_text(cross_task_to_csv(report))
    gap = None
    reference = cfg.reference or cfg.dialect_order()[0]
    try:
        gap = build_gap_report(report, reference)
        (out_dir / "gap.csv").write_text(gap_to_csv(gap))
        (out_dir / "gap.md").write_text(gap_to_markdown(gap))
    except MetricsError as exc:
        print(f"warning: gap report skipped: {exc}", file=sys.stderr)
    for rec in errors:
        print(
            f"warning: cell {rec['task']}/{rec['train']}->{rec['eval']}/{rec['mode']} "
            f"seed {rec['seed']} failed: {rec['error']}",
            file=sys.stderr,
        )
    _write_run_manifest(out_dir, "matrix", cfg.digest, cfg.seeds)
    return report, gap


def cmd_matrix(args):
    cfg = load_experiment_config(args.config)
    skip = args.skip_completed or cfg.skip_completed
    report, _ = run_experiment_matrix(cfg, args.out, skip_completed=skip)
    cells = sum(1 for c in report.cells.values() if c.f is not None or c.tta is not None)
    print(f"matrix complete: {len(report.tasks)} task(s), {cells} populated cell(s), reports in {args.out}")
    return 0


def _load_matrix_results(path):
    text = Path(path).read_text()
    return parse_matrix_csv(text)


def cmd_gap(args):
    results = _load_matrix_results(args.matrix)
    report = build_matrix_report(results)
    gap = build_gap_report(report, args.sae_tag)
    rendered = gap_to_markdown(gap) if args.format == "md" else gap_to_csv(gap)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        name = "gap.md" if args.format == "md" else "gap.csv"
        (out / name).write_text(rendered)
        _write_run_manifest(out, "gap", "", [])
    print(rendered, end="")
    return 0


def cmd_compare(args):
    results = _load_matrix_results(args.matrix)
    report = build_matrix_report(results)
    comparison = build_comparison_report(report, args.sae_tag)
    rendered = (
        comparison_to_markdown(comparison) if args.format == "md" else comparison_to_csv(comparison)
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        name = "comparison.md" if args.format == "md" else "comparison.csv"
        (out / name).write_text(rendered)
        _write_run_manifest(out, "compare", "", [])
    print(rendered, end="")
    return 0


def build_parser():
    parser = _Parser(prog="dialectshot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic source/target dataset pair")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--magnitude", type=float, default=1.0)
    p.add_argument("--kind", choices=("rotation", "translation", "mixed"), default="mixed")
    p.add_argument("--separation", type=float, default=2.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="finetune the head on a labeled dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None, help="hyperparameter JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--log", default=None, help="per-epoch metrics CSV path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("adapt", help="source-free adaptation to an unlabeled dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--log", default=None)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("eval", help="score a checkpoint on a labeled dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("matrix", help="run the full train-by-eval dialect matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--skip-completed", action="store_true")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("gap", help="dialect-gap report from a matrix CSV")
    p.add_argument("--matrix", required=True)
    p.add_argument("--sae-tag", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "md"), default="csv")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("compare", help="finetune-vs-adaptation comparison from a matrix CSV")
    p.add_argument("--matrix", required=True)
    p.add_argument("--sae-tag", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "md"), default="csv")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
