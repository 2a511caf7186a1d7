"""CLI contract: exit codes, help coverage, determinism, smoke runs."""

import json
import subprocess
import sys

import pytest

from efbench.cli import build_parser, main


def run_cli(*argv):
    """In-process invocation; returns exit code."""
    return main(list(argv))


class TestHelpCoverage:
    @staticmethod
    def _subcommands(parser):
        action = next(a for a in parser._actions
                      if getattr(a, "choices", None) and hasattr(a.choices, "items"))
        return action.choices

    def test_every_flag_documented(self):
        parser = build_parser()
        for name, sub in self._subcommands(parser).items():
            for action in sub._actions:
                assert action.help, f"{name}: flag {action.option_strings} lacks help"

    def test_subcommand_help_lists_all_flags(self, capsys):
        parser = build_parser()
        for name, sub in self._subcommands(parser).items():
            text = sub.format_help()
            for action in sub._actions:
                for opt in action.option_strings:
                    if opt.startswith("--"):
                        assert opt in text, (name, opt)

    def test_expected_subcommands_exist(self):
        choices = self._subcommands(build_parser())
        assert set(choices) == {"synth", "ingest", "train", "grid-search",
                                "evaluate", "report", "run"}


class TestExitCodes:
    def test_synth_too_few_hours_is_validation_error(self, tmp_path, capsys):
        code = run_cli("synth", "--hours", "47", "--out", str(tmp_path / "x.csv"),
                       "--seed", "1")
        assert code == 1
        assert ">= 48 hours" in capsys.readouterr().err

    def test_unknown_flag_is_validation_error(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("synth", "--hours", "48", "--definitely-unknown", "1")
        assert exc.value.code == 1

    def test_missing_subcommand_is_validation_error(self):
        with pytest.raises(SystemExit) as exc:
            run_cli()
        assert exc.value.code == 1

    def test_missing_data_file_is_validation_error(self, tmp_path, capsys):
        code = run_cli("ingest", "--csv", str(tmp_path / "nope.csv"), "--seed", "1")
        assert code in (1, 2)  # OSError path maps to 2, DataError to 1
        # must be a clean one-line diagnostic, not a traceback
        err = capsys.readouterr().err
        assert "Traceback" not in err


class TestSynthIngest:
    def test_synth_then_ingest(self, tmp_path, capsys):
        out = tmp_path / "synth.csv"
        assert run_cli("synth", "--hours", "72", "--out", str(out), "--seed", "5") == 0
        assert out.exists()
        assert run_cli("ingest", "--csv", str(out), "--seed", "5") == 0
        err = capsys.readouterr().err
        assert "72" in err

    def test_synth_deterministic_per_seed(self, tmp_path):
        a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
        run_cli("synth", "--hours", "60", "--out", str(a), "--seed", "9")
        run_cli("synth", "--hours", "60", "--out", str(b), "--seed", "9")
        run_cli("synth", "--hours", "60", "--out", str(c), "--seed", "10")
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()

    def test_omitted_seed_is_generated_and_printed(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        assert run_cli("synth", "--hours", "48", "--out", str(out)) == 0
        err = capsys.readouterr().err
        assert "using seed" in err

    def test_resolved_config_printed(self, tmp_path, capsys):
        run_cli("synth", "--hours", "48", "--out", str(tmp_path / "s.csv"),
                "--seed", "3")
        assert "resolved config" in capsys.readouterr().err


class TestTrainEvaluate:
    @pytest.fixture(scope="class")
    def data_csv(self, tmp_path_factory):
        path = tmp_path_factory.mktemp("cli") / "data.csv"
        assert run_cli("synth", "--hours", str(24 * 42), "--out", str(path),
                       "--seed", "21") == 0
        return path

    def test_train_produces_model_and_report(self, data_csv, tmp_path, capsys):
        out = tmp_path / "run"
        code = run_cli("train", "--model", "mlp",
                       "--config", json.dumps({"config": {"units": 8},
                                               "optimizer": {"kind": "sgd",
                                                             "learning_rate": 0.05}}),
                       "--data", str(data_csv), "--epoch-cap", "2",
                       "--output-dir", str(out), "--seed", "13")
        assert code == 0
        assert (out / "models" / "MLP.efb").exists()
        assert (out / "metrics.csv").exists()

    def test_evaluate_saved_model(self, data_csv, tmp_path):
        train_dir = tmp_path / "t"
        run_cli("train", "--model", "mlp",
                "--config", json.dumps({"config": {"units": 8}}),
                "--data", str(data_csv), "--epoch-cap", "2",
                "--output-dir", str(train_dir), "--seed", "13")
        eval_dir = tmp_path / "e"
        code = run_cli("evaluate", "--model-file", str(train_dir / "models" / "MLP.efb"),
                       "--data", str(data_csv), "--output-dir", str(eval_dir),
                       "--seed", "13")
        assert code == 0
        assert (eval_dir / "metrics.csv").exists()

    def test_grid_search_writes_ranked_csv(self, data_csv, tmp_path):
        out = tmp_path / "gs"
        code = run_cli("grid-search", "--model", "mlp",
                       "--space", json.dumps({"units": [4, 8],
                                              "learning_rate": [0.05]}),
                       "--data", str(data_csv), "--epoch-cap", "2",
                       "--output-dir", str(out), "--seed", "3")
        assert code == 0
        grid = (out / "grid_mlp.csv").read_text()
        assert grid.count("\n") == 3  # header + 2 points

    def test_hypernet_smoke_on_thousand_hours(self, tmp_path):
        # 1,000 hours of synthetic data through the heaviest architecture
        data = tmp_path / "kh.csv"
        assert run_cli("synth", "--hours", "1000", "--out", str(data),
                       "--seed", "3") == 0
        out = tmp_path / "hn"
        code = run_cli("train", "--model", "hypernet_lstm",
                       "--config", json.dumps({"config": {"units": 8,
                                                          "hyper_units1": 16,
                                                          "hyper_units2": 8}}),
                       "--data", str(data), "--epoch-cap", "1",
                       "--output-dir", str(out), "--seed", "3")
        assert code == 0
        assert (out / "models" / "HyperNetLSTM.efb").exists()
        assert (out / "metrics.csv").exists()

    def test_divergent_training_is_runtime_failure(self, data_csv, tmp_path, capsys):
        code = run_cli("train", "--model", "mlp",
                       "--config", json.dumps({"config": {"units": 8},
                                               "optimizer": {"kind": "sgd",
                                                             "learning_rate": 1e9}}),
                       "--data", str(data_csv), "--epoch-cap", "2",
                       "--output-dir", str(tmp_path / "div"), "--seed", "13")
        assert code == 2
        assert "failed" in capsys.readouterr().err

    def test_synth_with_profile_file(self, tmp_path):
        profile = {"base_kwh": 50.0, "noise_sigma": 1.0, "dips": []}
        ppath = tmp_path / "profile.json"
        ppath.write_text(json.dumps(profile))
        out = tmp_path / "p.csv"
        assert run_cli("synth", "--hours", "48", "--profile", str(ppath),
                       "--out", str(out), "--seed", "2") == 0
        assert out.exists()

    def test_report_regenerates_charts(self, data_csv, tmp_path):
        run_dir = tmp_path / "r"
        run_cli("train", "--model", "mlp",
                "--config", json.dumps({"config": {"units": 8}}),
                "--data", str(data_csv), "--epoch-cap", "2",
                "--output-dir", str(run_dir), "--seed", "13")
        (run_dir / "metrics_by_model.png").unlink()
        code = run_cli("report", "--run-dir", str(run_dir), "--seed", "1")
        assert code == 0
        assert (run_dir / "metrics_by_model.png").exists()


class TestRunManifest:
    def test_manifest_determinism_byte_identical_csvs(self, tmp_path):
        manifest = {
            "seed": 77,
            "dataset": {"synthetic": {"hours": 24 * 40}},
            "training": {"epoch_cap": 2},
            "models": [
                {"architecture": "mlp", "config": {"units": 8},
                 "optimizer": {"kind": "sgd", "learning_rate": 0.05}},
                {"architecture": "miniwsgd", "config": {"sgd_epochs": 3}},
            ],
        }
        mpath = tmp_path / "m.json"
        mpath.write_text(json.dumps(manifest))
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run_cli("run", "--manifest", str(mpath), "--output-dir", str(out_a),
                       "--seed", "77") == 0
        assert run_cli("run", "--manifest", str(mpath), "--output-dir", str(out_b),
                       "--seed", "77") == 0
        for name in ("metrics.csv", "predictions_MLP.csv", "predictions_MiniWSGD.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name

    def test_bad_manifest_is_validation_error(self, tmp_path, capsys):
        mpath = tmp_path / "bad.json"
        mpath.write_text(json.dumps({"models": []}))
        assert run_cli("run", "--manifest", str(mpath), "--seed", "1") == 1


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "efbench.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "synth" in proc.stdout
