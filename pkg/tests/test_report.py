"""Report emission: CSV formats, SVG polyline contract, chart files."""

import csv

import numpy as np
import pytest

from efbench.evaluation import EvaluationReport, MetricRow, persistence_baseline, season_rows
from efbench.report import (emit_report, read_metrics_csv, read_predictions_csv,
                            regenerate_overlay, top_models_by_smape,
                            write_predictions_csv)


@pytest.fixture(scope="module")
def full_report(small_dataset):
    report = EvaluationReport()
    predictions = {}
    rng = np.random.default_rng(3)
    idx = small_dataset.indices("test")
    actual = small_dataset.target_kwh[idx]
    report.extend(season_rows("Persistence", small_dataset, "test",
                              persistence_baseline(small_dataset, "test")))
    for i, name in enumerate(["Alpha", "Beta", "Gamma", "Delta", "Epsilon"]):
        preds = actual + rng.normal(0, 1.0 + i, actual.shape)
        predictions[name] = preds
        report.extend(season_rows(name, small_dataset, "test", preds))
    return report, predictions


class TestMetricsCsv:
    def test_row_count_models_times_seasons(self, full_report, small_dataset, tmp_path):
        report, predictions = full_report
        emit_report(report, tmp_path, dataset=small_dataset, predictions=predictions)
        rows = list(csv.reader(open(tmp_path / "metrics.csv")))
        n_models = 6  # persistence + 5
        n_seasons = len({r.season for r in report.rows if r.season != "ALL"})
        assert len(rows) == 1 + n_models * (1 + n_seasons)

    def test_roundtrip_through_reader(self, full_report, small_dataset, tmp_path):
        report, predictions = full_report
        emit_report(report, tmp_path, dataset=small_dataset, predictions=predictions)
        again = read_metrics_csv(tmp_path / "metrics.csv")
        assert len(again.rows) == len(report.rows)
        for orig in report.rows:
            back = again.row(orig.model, orig.season)
            assert back.smape == pytest.approx(orig.smape, rel=1e-5)
            assert back.n == orig.n

    def test_sorted_by_smape_within_season_block(self, full_report, small_dataset, tmp_path):
        report, predictions = full_report
        emit_report(report, tmp_path, dataset=small_dataset, predictions=predictions)
        rows = list(csv.reader(open(tmp_path / "metrics.csv")))[1:]
        by_season = {}
        for r in rows:
            by_season.setdefault(r[1], []).append(float(r[4]))
        for season, smapes in by_season.items():
            assert smapes == sorted(smapes), season


class TestPredictionsCsv:
    def test_roundtrip(self, small_dataset, tmp_path):
        idx = small_dataset.indices("test")[:5]
        starts = [small_dataset.target_start[i] for i in idx]
        actual = small_dataset.target_kwh[idx]
        preds = actual * 1.1
        path = tmp_path / "p.csv"
        write_predictions_csv(path, starts, actual, preds)
        starts2, actual2, preds2 = read_predictions_csv(path)
        assert starts2 == starts
        np.testing.assert_allclose(actual2, actual, rtol=1e-5)
        np.testing.assert_allclose(preds2, preds, rtol=1e-5)

    def test_row_count(self, small_dataset, tmp_path):
        idx = small_dataset.indices("test")[:5]
        starts = [small_dataset.target_start[i] for i in idx]
        actual = small_dataset.target_kwh[idx]
        path = tmp_path / "p.csv"
        write_predictions_csv(path, starts, actual, actual)
        rows = list(csv.reader(open(path)))
        assert len(rows) == 1 + 5 * 24


class TestCharts:
    def test_svg_has_exactly_five_polylines(self, full_report, small_dataset, tmp_path):
        report, predictions = full_report
        emit_report(report, tmp_path, dataset=small_dataset, predictions=predictions)
        svg = (tmp_path / "forecast_overlay.svg").read_text(encoding="utf-8")
        assert svg.count("<polyline") == 5  # actual + top 4 models
        assert svg.startswith("<svg") or "<svg" in svg.split("\n")[0]

    def test_top4_selection_excludes_persistence(self, full_report):
        report, _ = full_report
        top = top_models_by_smape(report, 4)
        assert "Persistence" not in top
        assert len(top) == 4
        # Alpha had the least noise: must rank first
        assert top[0] == "Alpha"

    def test_png_charts_written(self, full_report, small_dataset, tmp_path):
        report, predictions = full_report
        written = emit_report(report, tmp_path, dataset=small_dataset,
                              predictions=predictions)
        names = {p.name for p in written}
        assert {"metrics_by_model.png", "seasonal_smape.png",
                "forecast_overlay.png", "forecast_overlay.svg"} <= names
        for p in written:
            assert p.stat().st_size > 0

    def test_regenerate_overlay_from_csvs(self, full_report, small_dataset, tmp_path):
        report, predictions = full_report
        emit_report(report, tmp_path, dataset=small_dataset, predictions=predictions)
        (tmp_path / "forecast_overlay.svg").unlink()
        made = regenerate_overlay(report, tmp_path)
        assert made == 2
        assert (tmp_path / "forecast_overlay.svg").exists()

    def test_empty_report_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="empty"):
            emit_report(EvaluationReport(), tmp_path)


def test_metrics_row_six_significant_digits(tmp_path):
    report = EvaluationReport()
    report.rows = [MetricRow("M", "ALL", 1.23456789, 2.3456789e3, 12.3456789, 240)]
    from efbench.report import write_metrics_csv

    write_metrics_csv(report, tmp_path / "m.csv")
    row = list(csv.reader(open(tmp_path / "m.csv")))[1]
    assert row[2] == "1.23457"
    assert row[3] == "2345.68"
    assert row[4] == "12.3457"
