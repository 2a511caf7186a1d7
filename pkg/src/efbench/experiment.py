"""Manifest-driven experiment runner.

A manifest is a JSON document naming a dataset source (synthetic profile or
CSV), the models to train (fixed configs or per-model search spaces), seeds,
and the output directory. The run trains every listed model, evaluates the
test split, and writes metric tables, prediction CSVs, model files, charts,
and a machine-readable summary. Per-model seeds derive from the master seed
and the model name, and results merge in manifest order, so a rerun with
identical seeds reproduces every CSV byte for byte regardless of worker
count.
"""

import json
import os
import time
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from efbench.data import (DataError, ScalerParams, WindowedDataset, build_dataset,
                          ingest_csv)
from efbench.evaluation import EvaluationReport, persistence_baseline, season_rows
from efbench.models import NEURAL_MODELS, build_model
from efbench.models.base import count_parameters
from efbench.models.ensembles import ENSEMBLE_MODELS, build_ensemble
from efbench.optim import OptimizerConfig
from efbench.persist import TrainedModel, save_model
from efbench.report import emit_report, fmt
from efbench.rng import RngStream, derive_seed
from efbench.synthetic import SyntheticProfile, generate_synthetic
from efbench.training import (SearchSpace, TrainingDiverged, grid_search,
                              run_grid_point, split_point, train)

DISPLAY_NAMES = {
    "mlp": "MLP", "tcn": "TempConv", "rnn": "RNN", "lstm": "LSTM", "gru": "GRU",
    "attention_lstm": "AttentionLSTM", "transformer": "Transformer",
    "nbeats": "Nbeats", "arnet": "ARFFNN", "hypernet_lstm": "HyperNetLSTM",
    "miniwsgd": "MiniWSGD", "miniwxgboost": "MiniWXGBoost",
    "miniautoencxgboost": "MiniAutoEncXGBoost",
}


class ManifestError(ValueError):
    pass


def load_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    validate_manifest(manifest)
    return manifest


def validate_manifest(manifest: dict) -> None:
    if "dataset" not in manifest:
        raise ManifestError("manifest needs a 'dataset' section")
    ds = manifest["dataset"]
    if ("synthetic" in ds) == ("csv" in ds):
        raise ManifestError("dataset must name exactly one of 'synthetic' or 'csv'")
    if "csv" in ds and not Path(ds["csv"]).exists():
        raise ManifestError(f"dataset csv not found: {ds['csv']}")
    models = manifest.get("models")
    if not models:
        raise ManifestError("manifest lists no models")
    known = set(NEURAL_MODELS) | set(ENSEMBLE_MODELS)
    seen_names = set()
    for entry in models:
        arch = entry.get("architecture")
        if arch not in known:
            raise ManifestError(f"unknown architecture {arch!r}; expected one of "
                                f"{sorted(known)}")
        name = entry.get("name") or DISPLAY_NAMES[arch]
        if name in seen_names:
            raise ManifestError(f"duplicate model name {name!r}")
        seen_names.add(name)
        if "search_space" in entry and arch in ENSEMBLE_MODELS:
            raise ManifestError(f"{name}: grid search applies to neural models only")


def build_frame(manifest: dict):
    ds = manifest["dataset"]
    if "synthetic" in ds:
        synth = ds["synthetic"]
        profile = SyntheticProfile(**synth.get("profile", {}))
        start = datetime.fromisoformat(synth.get("start", "2019-01-01T00:00"))
        hours = int(synth["hours"])
        seed = derive_seed(int(manifest.get("seed", 0)), "dataset")
        return generate_synthetic(profile, start, hours, seed)
    frame, _ = ingest_csv(ds["csv"], int(ds.get("impute_max_gap_hours", 0)))
    return frame


# ---------------------------------------------------------------------------
# dataset cache (workers re-load from disk instead of pickling 30 MB arrays)
# ---------------------------------------------------------------------------

_EPOCH = datetime(1970, 1, 1)


def save_dataset(ds: WindowedDataset, path) -> None:
    starts = np.array([(t - _EPOCH) // timedelta(seconds=1) for t in ds.target_start],
                      dtype=np.int64)
    np.savez(path, inputs=ds.inputs, targets=ds.targets, target_kwh=ds.target_kwh,
             input_kwh=ds.input_kwh, target_start=starts,
             season=ds.season.astype("U6"), split=ds.split.astype("U5"),
             x_min=ds.scaler.x_min, x_max=ds.scaler.x_max)


def load_dataset(path) -> WindowedDataset:
    with np.load(path) as z:
        starts = [_EPOCH + timedelta(seconds=int(s)) for s in z["target_start"]]
        return WindowedDataset(
            inputs=z["inputs"], targets=z["targets"], target_kwh=z["target_kwh"],
            input_kwh=z["input_kwh"], target_start=starts, season=z["season"],
            split=z["split"], scaler=ScalerParams(z["x_min"], z["x_max"]))


# ---------------------------------------------------------------------------
# per-model worker
# ---------------------------------------------------------------------------

def run_model_entry(entry: dict, dataset_path: str, master_seed: int,
                    training_defaults: dict, models_dir: str) -> dict:
    """Train/fit one manifest entry and evaluate it on the test split.

    Returns a plain dict so the pool can pickle it; 'error' is set (and the
    rest absent) when the run failed.
    """
    arch = entry["architecture"]
    name = entry.get("name") or DISPLAY_NAMES[arch]
    out: dict = {"name": name, "architecture": arch}
    started = time.perf_counter()
    try:
        dataset = load_dataset(dataset_path)
        seed = derive_seed(master_seed, f"model/{name}")
        epoch_cap = int(entry.get("epoch_cap", training_defaults["epoch_cap"]))
        patience = int(entry.get("patience", training_defaults["patience"]))
        batch_size = int(entry.get("batch_size", training_defaults["batch_size"]))

        grid_rows = None
        if arch in ENSEMBLE_MODELS:
            model = build_ensemble(arch, entry.get("config"))
            model.fit(dataset, seed=seed)
            trained = TrainedModel(arch, dict(model.config), model, dataset.scaler,
                                   metadata={"seed": seed})
            out["n_parameters"] = 0
        else:
            if "search_space" in entry:
                space = SearchSpace(dict(entry["search_space"]))
                results = grid_search(space, arch, dataset, seed,
                                      epoch_cap=epoch_cap, patience=patience,
                                      batch_size=batch_size)
                grid_rows = [_grid_row(r) for r in results]
                best = results[0]
                point = {**best.config, "optimizer": best.optimizer.get("kind", "sgd"),
                         "loss": best.loss_kind}
                for key in ("learning_rate", "weight_decay"):
                    if key in best.optimizer:
                        point[key] = best.optimizer[key]
                result, model = _train_point(arch, point, dataset, seed,
                                             epoch_cap, patience, batch_size)
            else:
                point = dict(entry.get("config", {}))
                point["optimizer"] = entry.get("optimizer", {}).get("kind", "sgd")
                for key in ("learning_rate", "weight_decay"):
                    if key in entry.get("optimizer", {}):
                        point[key] = entry["optimizer"][key]
                point["loss"] = entry.get("loss", "mse")
                result, model = _train_point(arch, point, dataset, seed,
                                             epoch_cap, patience, batch_size)
            trained = TrainedModel(arch, dict(model.config), model, dataset.scaler,
                                   metadata={"seed": seed,
                                             "best_epoch": result.best_epoch,
                                             "stopped_epoch": result.stopped_epoch,
                                             "best_val_loss": result.best_val_loss})
            out["n_parameters"] = result.n_parameters
            out["train_result"] = {
                "best_val_loss": result.best_val_loss,
                "best_epoch": result.best_epoch,
                "stopped_epoch": result.stopped_epoch,
                "val_losses": result.val_losses,
            }

        model_path = Path(models_dir) / f"{name}.efb"
        save_model(trained, model_path)
        idx = dataset.indices("test")
        preds_kwh = trained.predict_kwh(dataset.inputs[idx])
        out["rows"] = season_rows(name, dataset, "test", preds_kwh)
        out["predictions"] = preds_kwh
        out["model_file"] = str(model_path)
        out["grid"] = grid_rows
    except (TrainingDiverged, DataError, ValueError, RuntimeError) as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
    out["wall_time_s"] = time.perf_counter() - started
    return out


def _train_point(arch, point, dataset, seed, epoch_cap, patience, batch_size):
    config, opt_kwargs, loss_kind = split_point(point)
    rng = RngStream(seed, f"model/{arch}")
    model = build_model(arch, config, rng)
    result = train(model, dataset, OptimizerConfig(**opt_kwargs), loss_kind=loss_kind,
                   epoch_cap=epoch_cap, patience=patience, batch_size=batch_size,
                   seed=seed)
    return result, model


def _grid_row(result) -> dict:
    return {"config": result.config, "optimizer": result.optimizer,
            "loss": result.loss_kind, "best_val_loss": result.best_val_loss,
            "best_epoch": result.best_epoch, "stopped_epoch": result.stopped_epoch,
            "n_parameters": result.n_parameters, "error": result.error}


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def run_experiment(manifest: dict, output_dir, threads: int = 1) -> dict:
    """Execute a validated manifest; returns the run summary dict."""
    validate_manifest(manifest)
    out_dir = Path(output_dir)
    models_dir = out_dir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    master_seed = int(manifest.get("seed", 0))
    training_defaults = {"epoch_cap": 200, "patience": 5, "batch_size": 64}
    training_defaults.update(manifest.get("training", {}))

    frame = build_frame(manifest)
    dataset = build_dataset(frame)
    dataset_path = out_dir / "dataset.npz"
    save_dataset(dataset, dataset_path)

    entries = manifest["models"]
    jobs = [(entry, str(dataset_path), master_seed, training_defaults, str(models_dir))
            for entry in entries]
    if threads > 1 and len(entries) > 1:
        results = _parallel_entries(jobs, threads)
    else:
        results = [run_model_entry(*job) for job in jobs]

    report = EvaluationReport(metadata={"seed": master_seed})
    predictions = {}
    report.extend(season_rows("Persistence", dataset, "test",
                              persistence_baseline(dataset, "test")))
    failures = []
    for res in results:
        if res.get("error"):
            failures.append((res["name"], res["error"]))
            continue
        report.extend(res["rows"])
        predictions[res["name"]] = res["predictions"]

    written = emit_report(report, out_dir, dataset=dataset, predictions=predictions)
    for res in results:
        if res.get("grid"):
            grid_path = out_dir / f"grid_{res['name']}.csv"
            _write_grid_csv(res["grid"], grid_path)
            written.append(grid_path)

    summary = {
        "seed": master_seed,
        "dataset": {"samples": len(dataset),
                    "train": int((dataset.split == "train").sum()),
                    "val": int((dataset.split == "val").sum()),
                    "test": int((dataset.split == "test").sum())},
        "models": [{k: v for k, v in res.items()
                    if k not in ("rows", "predictions", "grid")}
                   for res in results],
        "failures": [{"name": n, "error": e} for n, e in failures],
        "report_files": [str(p) for p in written],
    }
    with open(out_dir / "run_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


def _parallel_entries(jobs, threads):
    import concurrent.futures as cf
    import multiprocessing as mp

    # keep worker BLAS single-threaded so the pool owns the cores and reruns
    # stay bit-identical
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")
    ctx = mp.get_context("spawn")
    with cf.ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as pool:
        futures = [pool.submit(run_model_entry, *job) for job in jobs]
        return [f.result() for f in futures]


def _write_grid_csv(grid_rows, path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "config", "optimizer", "loss", "best_val_loss",
                         "best_epoch", "stopped_epoch", "n_parameters", "error"])
        for rank, row in enumerate(grid_rows, start=1):
            writer.writerow([
                rank, json.dumps(row["config"], sort_keys=True),
                json.dumps(row["optimizer"], sort_keys=True), row["loss"],
                "" if not np.isfinite(row["best_val_loss"]) else fmt(row["best_val_loss"]),
                row["best_epoch"], row["stopped_epoch"], row["n_parameters"],
                row["error"]])
