"""Manifest validation, dataset cache round-trip, and experiment orchestration."""

import json

import numpy as np
import pytest

from efbench.experiment import (DISPLAY_NAMES, ManifestError, load_dataset,
                                run_experiment, save_dataset, validate_manifest)


def base_manifest(**overrides):
    manifest = {
        "seed": 5,
        "dataset": {"synthetic": {"hours": 24 * 40}},
        "training": {"epoch_cap": 2},
        "models": [
            {"architecture": "mlp", "config": {"units": 8},
             "optimizer": {"kind": "sgd", "learning_rate": 0.05}},
        ],
    }
    manifest.update(overrides)
    return manifest


class TestValidation:
    def test_missing_dataset_rejected(self):
        with pytest.raises(ManifestError, match="dataset"):
            validate_manifest({"models": [{"architecture": "mlp"}]})

    def test_unknown_architecture_rejected(self):
        with pytest.raises(ManifestError, match="unknown architecture"):
            validate_manifest(base_manifest(models=[{"architecture": "resnet"}]))

    def test_missing_csv_rejected(self):
        with pytest.raises(ManifestError, match="not found"):
            validate_manifest(base_manifest(dataset={"csv": "/nope/missing.csv"}))

    def test_duplicate_names_rejected(self):
        models = [{"architecture": "mlp"}, {"architecture": "mlp"}]
        with pytest.raises(ManifestError, match="duplicate"):
            validate_manifest(base_manifest(models=models))

    def test_both_sources_rejected(self):
        with pytest.raises(ManifestError, match="exactly one"):
            validate_manifest(base_manifest(
                dataset={"synthetic": {"hours": 48}, "csv": "x.csv"}))

    def test_grid_on_ensemble_rejected(self):
        models = [{"architecture": "miniwsgd", "search_space": {"num_features": [512]}}]
        with pytest.raises(ManifestError, match="neural"):
            validate_manifest(base_manifest(models=models))

    def test_display_names_cover_all_architectures(self):
        from efbench.models import NEURAL_MODELS
        from efbench.models.ensembles import ENSEMBLE_MODELS

        assert set(DISPLAY_NAMES) == set(NEURAL_MODELS) | set(ENSEMBLE_MODELS)


class TestDatasetCache:
    def test_roundtrip(self, tiny_dataset, tmp_path):
        path = tmp_path / "ds.npz"
        save_dataset(tiny_dataset, path)
        again = load_dataset(path)
        np.testing.assert_array_equal(again.inputs, tiny_dataset.inputs)
        np.testing.assert_array_equal(again.target_kwh, tiny_dataset.target_kwh)
        assert list(again.split) == list(tiny_dataset.split)
        assert list(again.season) == list(tiny_dataset.season)
        assert again.target_start == tiny_dataset.target_start
        np.testing.assert_array_equal(again.scaler.x_min, tiny_dataset.scaler.x_min)


class TestRunExperiment:
    def test_two_models_produce_files_and_report(self, tmp_path):
        manifest = base_manifest(models=[
            {"architecture": "mlp", "config": {"units": 8},
             "optimizer": {"kind": "sgd", "learning_rate": 0.05}},
            {"architecture": "arnet", "config": {"units": 8},
             "optimizer": {"kind": "sgd", "learning_rate": 0.05}},
        ])
        summary = run_experiment(manifest, tmp_path, threads=1)
        assert not summary["failures"]
        assert (tmp_path / "models" / "MLP.efb").exists()
        assert (tmp_path / "models" / "ARFFNN.efb").exists()
        assert (tmp_path / "metrics.csv").exists()
        assert (tmp_path / "run_summary.json").exists()
        # persistence + 2 models in the report
        import csv
        rows = list(csv.reader(open(tmp_path / "metrics.csv")))[1:]
        assert {r[0] for r in rows} == {"Persistence", "MLP", "ARFFNN"}

    @pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
    def test_failed_model_recorded_not_fatal(self, tmp_path):
        manifest = base_manifest(models=[
            {"architecture": "mlp", "config": {"units": 8},
             "optimizer": {"kind": "sgd", "learning_rate": 1e9}},
            {"architecture": "arnet", "config": {"units": 8},
             "optimizer": {"kind": "sgd", "learning_rate": 0.05}},
        ])
        summary = run_experiment(manifest, tmp_path, threads=1)
        assert len(summary["failures"]) == 1
        assert summary["failures"][0]["name"] == "MLP"
        assert (tmp_path / "models" / "ARFFNN.efb").exists()

    def test_grid_search_entry_writes_grid_csv(self, tmp_path):
        manifest = base_manifest(models=[
            {"architecture": "mlp",
             "search_space": {"units": [4, 8], "learning_rate": [0.05]}},
        ])
        summary = run_experiment(manifest, tmp_path, threads=1)
        assert not summary["failures"]
        grid = (tmp_path / "grid_MLP.csv").read_text()
        assert grid.count("\n") == 3

    def test_rerun_reproduces_csvs_byte_identically(self, tmp_path):
        manifest = base_manifest(models=[
            {"architecture": "lstm", "config": {"units": 8},
             "optimizer": {"kind": "adam", "learning_rate": 0.01}},
            {"architecture": "miniwsgd", "config": {"sgd_epochs": 3}},
        ])
        a, b = tmp_path / "a", tmp_path / "b"
        run_experiment(manifest, a, threads=1)
        run_experiment(manifest, b, threads=1)
        for name in ("metrics.csv", "predictions_LSTM.csv", "predictions_MiniWSGD.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
