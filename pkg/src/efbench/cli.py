"""Command-line interface for the forecasting bench.

Subcommands mirror the pipeline stages: synth, ingest, train, grid-search,
evaluate, report, run. Human-readable progress goes to stderr; machine
artifacts (CSV, SVG, PNG, model files) go to disk; stdout stays clean for
piping. Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

import argparse
import json
import os
import sys
from pathlib import Path


class CliParser(argparse.ArgumentParser):
    """argparse maps usage errors to exit 2; this bench reserves 2 for
    runtime failures, so remap them to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _threads_default() -> int:
    env = os.environ.get("EFBENCH_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def build_parser() -> CliParser:
    parser = CliParser(prog="efbench",
                       description="Day-ahead energy-load forecasting bench")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(p):
        p.add_argument("--seed", type=int, default=None,
                       help="master random seed; omitted picks one and prints it")
        p.add_argument("--output-dir", default="efbench-out",
                       help="directory for artifacts (default: efbench-out)")
        p.add_argument("--threads", type=int, default=_threads_default(),
                       help="worker pool width (default: $EFBENCH_THREADS or 1)")

    p = sub.add_parser("synth", help="generate synthetic hourly consumption CSV")
    p.add_argument("--profile", default=None,
                   help="JSON synthetic profile file (default: built-in profile)")
    p.add_argument("--hours", type=int, required=True,
                   help="number of hourly rows to generate (>= 48)")
    p.add_argument("--start", default="2019-01-01T00:00",
                   help="first timestamp, ISO-8601 (default: 2019-01-01T00:00)")
    p.add_argument("--out", required=True, help="output CSV path")
    common(p)

    p = sub.add_parser("ingest", help="validate an hourly CSV and derive features")
    p.add_argument("--csv", required=True, help="input CSV (timestamp,temperature,energy)")
    p.add_argument("--impute-gap", type=int, default=0,
                   help="max gap (hours) to fill by linear interpolation (default 0)")
    p.add_argument("--out", default=None,
                   help="optional path for the validated, gap-filled CSV")
    common(p)

    p = sub.add_parser("train", help="train one model on a CSV dataset")
    p.add_argument("--model", required=True, help="architecture id (e.g. lstm, miniwxgboost)")
    p.add_argument("--config", default=None,
                   help="JSON (inline or file) with config/optimizer/loss overrides")
    p.add_argument("--data", required=True, help="hourly CSV dataset")
    p.add_argument("--impute-gap", type=int, default=0,
                   help="max gap (hours) to fill when ingesting (default 0)")
    p.add_argument("--epoch-cap", type=int, default=200,
                   help="maximum training epochs (default 200)")
    p.add_argument("--patience", type=int, default=5,
                   help="early-stopping patience in epochs (default 5)")
    p.add_argument("--batch-size", type=int, default=64,
                   help="mini-batch size (default 64)")
    common(p)

    p = sub.add_parser("grid-search", help="grid-search hyperparameters for one model")
    p.add_argument("--space", required=True,
                   help="JSON (inline or file) mapping hyperparameter to candidates")
    p.add_argument("--model", required=True, help="architecture id")
    p.add_argument("--data", required=True, help="hourly CSV dataset")
    p.add_argument("--impute-gap", type=int, default=0,
                   help="max gap (hours) to fill when ingesting (default 0)")
    p.add_argument("--epoch-cap", type=int, default=200,
                   help="maximum training epochs per point (default 200)")
    p.add_argument("--patience", type=int, default=5,
                   help="early-stopping patience in epochs (default 5)")
    p.add_argument("--batch-size", type=int, default=64,
                   help="mini-batch size (default 64)")
    common(p)

    p = sub.add_parser("evaluate", help="evaluate a saved model file on a CSV dataset")
    p.add_argument("--model-file", required=True, help="EFBENCH1 model file")
    p.add_argument("--data", required=True, help="hourly CSV dataset")
    p.add_argument("--impute-gap", type=int, default=0,
                   help="max gap (hours) to fill when ingesting (default 0)")
    p.add_argument("--split", default="test", choices=("train", "val", "test"),
                   help="dataset split to evaluate (default test)")
    common(p)

    p = sub.add_parser("report", help="regenerate charts from a run directory")
    p.add_argument("--run-dir", required=True, help="directory holding metrics.csv")
    common(p)

    p = sub.add_parser("run", help="run a full experiment manifest")
    p.add_argument("--manifest", required=True, help="JSON manifest file")
    common(p)

    return parser


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    from efbench.rng import fresh_seed

    seed = fresh_seed()
    print(f"efbench: no --seed given, using seed {seed}", file=sys.stderr)
    return seed


def _print_resolved(args, seed: int) -> None:
    resolved = {k: v for k, v in vars(args).items() if k != "seed"}
    resolved["seed"] = seed
    print(f"efbench: resolved config: {json.dumps(resolved, sort_keys=True, default=str)}",
          file=sys.stderr)


def _load_json_arg(raw: str, what: str):
    path = Path(raw)
    try:
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{what}: not valid JSON (inline or file): {exc}") from None


def _build_dataset_from_csv(path, impute_gap):
    from efbench.data import build_dataset, ingest_csv

    frame, summary = ingest_csv(path, impute_gap)
    if summary.rows_imputed:
        print(f"efbench: imputed {summary.rows_imputed} missing rows", file=sys.stderr)
    return build_dataset(frame)


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------

def cmd_synth(args, seed):
    from datetime import datetime

    from efbench.synthetic import SyntheticProfile, generate_synthetic

    if args.hours < 48:
        raise ValueError("need >= 48 hours for one window/target pair")
    profile = (SyntheticProfile.from_file(args.profile) if args.profile
               else SyntheticProfile())
    frame = generate_synthetic(profile, datetime.fromisoformat(args.start),
                               args.hours, seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    frame.write_csv(args.out)
    print(f"efbench: wrote {len(frame)} hourly rows to {args.out}", file=sys.stderr)
    return 0


def cmd_ingest(args, seed):
    from efbench.data import ingest_csv

    frame, summary = ingest_csv(args.csv, args.impute_gap)
    print(f"efbench: {summary.rows_read} rows read, {summary.rows_imputed} imputed, "
          f"{len(frame)} total hours "
          f"({frame.timestamps[0].isoformat()} .. {frame.timestamps[-1].isoformat()})",
          file=sys.stderr)
    if args.out:
        frame.write_csv(args.out)
        print(f"efbench: wrote validated frame to {args.out}", file=sys.stderr)
    return 0


def cmd_train(args, seed):
    from efbench.experiment import DISPLAY_NAMES, run_model_entry, save_dataset

    entry = {"architecture": args.model}
    if args.config:
        overrides = _load_json_arg(args.config, "--config")
        entry.update({k: v for k, v in overrides.items()
                      if k in ("config", "optimizer", "loss", "name")})
    out_dir = Path(args.output_dir)
    models_dir = out_dir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    dataset = _build_dataset_from_csv(args.data, args.impute_gap)
    dataset_path = out_dir / "dataset.npz"
    save_dataset(dataset, dataset_path)
    defaults = {"epoch_cap": args.epoch_cap, "patience": args.patience,
                "batch_size": args.batch_size}
    result = run_model_entry(entry, str(dataset_path), seed, defaults, str(models_dir))
    if result.get("error"):
        print(f"efbench: training failed: {result['error']}", file=sys.stderr)
        return 2
    _write_single_model_report(result, dataset, out_dir)
    print(f"efbench: model saved to {result['model_file']}", file=sys.stderr)
    return 0


def _write_single_model_report(result, dataset, out_dir):
    from efbench.evaluation import EvaluationReport, persistence_baseline, season_rows
    from efbench.report import emit_report

    report = EvaluationReport()
    report.extend(season_rows("Persistence", dataset, "test",
                              persistence_baseline(dataset, "test")))
    report.extend(result["rows"])
    emit_report(report, out_dir, dataset=dataset,
                predictions={result["name"]: result["predictions"]})
    for row in report.for_season("ALL"):
        print(f"efbench:   {row.model:<24s} SMAPE {row.smape:7.3f}%  "
              f"MAE {row.mae:8.3f}  RMSE {row.rmse:8.3f}", file=sys.stderr)


def cmd_grid_search(args, seed):
    from efbench.experiment import _write_grid_csv, _grid_row
    from efbench.training import SearchSpace, grid_search

    space = SearchSpace(_load_json_arg(args.space, "--space"))
    dataset = _build_dataset_from_csv(args.data, args.impute_gap)
    print(f"efbench: grid of {space.cardinality()} points", file=sys.stderr)
    results = grid_search(space, args.model, dataset, seed,
                          epoch_cap=args.epoch_cap, patience=args.patience,
                          batch_size=args.batch_size, workers=args.threads)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid_path = out_dir / f"grid_{args.model}.csv"
    _write_grid_csv([_grid_row(r) for r in results], grid_path)
    print(f"efbench: wrote {grid_path}", file=sys.stderr)
    for r in results[:5]:
        status = r.error or f"val {r.best_val_loss:.6g} @ epoch {r.best_epoch}"
        print(f"efbench:   {json.dumps(r.config, sort_keys=True)} "
              f"{r.optimizer.get('kind', 'sgd')}/{r.loss_kind}: {status}",
              file=sys.stderr)
    return 0


def cmd_evaluate(args, seed):
    from efbench.evaluation import EvaluationReport, persistence_baseline, season_rows
    from efbench.persist import load_model
    from efbench.report import emit_report

    trained = load_model(args.model_file)
    dataset = _build_dataset_from_csv(args.data, args.impute_gap)
    idx = dataset.indices(args.split)
    preds = trained.predict_kwh(dataset.inputs[idx])
    name = trained.metadata.get("name") or trained.architecture
    report = EvaluationReport()
    report.extend(season_rows("Persistence", dataset, args.split,
                              persistence_baseline(dataset, args.split)))
    report.extend(season_rows(name, dataset, args.split, preds))
    out_dir = Path(args.output_dir)
    emit_report(report, out_dir, dataset=dataset, split=args.split,
                predictions={name: preds})
    for row in report.for_season("ALL"):
        print(f"efbench:   {row.model:<24s} SMAPE {row.smape:7.3f}%  "
              f"MAE {row.mae:8.3f}  RMSE {row.rmse:8.3f}", file=sys.stderr)
    print(f"efbench: report written to {out_dir}", file=sys.stderr)
    return 0


def cmd_report(args, seed):
    from efbench.report import (plot_metric_bars, plot_seasonal_smape,
                                read_metrics_csv, regenerate_overlay)

    run_dir = Path(args.run_dir)
    metrics_path = run_dir / "metrics.csv"
    if not metrics_path.exists():
        raise ValueError(f"no metrics.csv under {run_dir}")
    report = read_metrics_csv(metrics_path)
    plot_metric_bars(report, run_dir / "metrics_by_model.png")
    plot_seasonal_smape(report, run_dir / "seasonal_smape.png")
    made = regenerate_overlay(report, run_dir)
    print(f"efbench: regenerated {2 + made} chart(s) in {run_dir}", file=sys.stderr)
    return 0


def cmd_run(args, seed):
    from efbench.experiment import load_manifest, run_experiment

    manifest = load_manifest(args.manifest)
    if args.seed is not None:
        manifest["seed"] = seed
    else:
        manifest.setdefault("seed", seed)
    out_dir = Path(manifest.get("output_dir", args.output_dir))
    if args.output_dir != "efbench-out":
        out_dir = Path(args.output_dir)
    summary = run_experiment(manifest, out_dir, threads=args.threads)
    for entry in summary["models"]:
        status = entry.get("error") or f"ok ({entry['wall_time_s']:.1f}s)"
        print(f"efbench:   {entry['name']:<24s} {status}", file=sys.stderr)
    print(f"efbench: artifacts in {out_dir}", file=sys.stderr)
    return 2 if summary["failures"] else 0


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "train": cmd_train,
    "grid-search": cmd_grid_search,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "run": cmd_run,
}


def main(argv=None) -> int:
    # cap BLAS threads before numpy loads: reruns must be bit-identical and
    # the worker pool owns parallelism
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")

    parser = build_parser()
    args = parser.parse_args(argv)
    seed = _resolve_seed(args)
    _print_resolved(args, seed)

    from efbench.data import DataError
    from efbench.experiment import ManifestError
    from efbench.models.base import ConfigError
    from efbench.persist import PersistError

    try:
        return COMMANDS[args.command](args, seed)
    except (DataError, ManifestError, ConfigError, PersistError, ValueError) as exc:
        print(f"efbench: error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, OSError) as exc:
        print(f"efbench: runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
