"""Test-split evaluation with seasonal breakdown.

Predictions are inverse-scaled to kWh and pooled over every (sample, hour)
pair. Each model contributes one ALL row plus one row per season present
in the split; the ALL row is assembled from the season rows as their
sample-count-weighted mean (squared mean for RMSE), so the recombination
identities hold exactly.
"""

from dataclasses import dataclass, field

import numpy as np

from efbench.data import SEASONS, WindowedDataset
from efbench.metrics import mae, rmse, smape

ALL_SEASONS = "ALL"


@dataclass
class MetricRow:
    model: str
    season: str
    mae: float
    rmse: float
    smape: float
    n: int          # pooled (sample, hour) count


@dataclass
class EvaluationReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def for_season(self, season: str) -> list:
        out = [r for r in self.rows if r.season == season]
        return sorted(out, key=lambda r: (r.smape, r.model))

    def models(self) -> list:
        return sorted({r.model for r in self.rows})

    def row(self, model: str, season: str) -> MetricRow:
        for r in self.rows:
            if r.model == model and r.season == season:
                return r
        raise KeyError(f"no row for ({model}, {season})")

    def extend(self, rows):
        self.rows.extend(rows)


def season_rows(model_name: str, dataset: WindowedDataset, split: str,
                predictions_kwh: np.ndarray) -> list[MetricRow]:
    """Per-season rows plus the exactly-recombined ALL row for one model."""
    idx = dataset.indices(split)
    if idx.size == 0:
        raise ValueError(f"no samples in split {split!r}")
    if predictions_kwh.shape != (idx.size, 24):
        raise ValueError(f"predictions shape {predictions_kwh.shape} does not match "
                         f"split {split!r} of {idx.size} samples")
    actual = dataset.target_kwh[idx]
    seasons = dataset.season[idx]

    rows = []
    season_stats = []
    for season in SEASONS:
        mask = seasons == season
        if not mask.any():
            continue
        a = actual[mask].reshape(-1)
        p = predictions_kwh[mask].reshape(-1)
        row = MetricRow(model_name, season, mae(a, p), rmse(a, p), smape(a, p), a.size)
        rows.append(row)
        season_stats.append(row)

    n_total = sum(r.n for r in season_stats)
    all_mae = sum(r.n * r.mae for r in season_stats) / n_total
    all_rmse = float(np.sqrt(sum(r.n * r.rmse ** 2 for r in season_stats) / n_total))
    all_smape = sum(r.n * r.smape for r in season_stats) / n_total
    rows.insert(0, MetricRow(model_name, ALL_SEASONS, all_mae, all_rmse, all_smape, n_total))
    return rows


def evaluate(trained, dataset: WindowedDataset, split: str = "test",
             model_name: str | None = None) -> list[MetricRow]:
    """Predict a split, inverse-scale to kWh, and compute its metric rows."""
    idx = dataset.indices(split)
    if idx.size == 0:
        raise ValueError(f"no samples in split {split!r}")
    preds_kwh = trained.predict_kwh(dataset.inputs[idx])
    return season_rows(model_name or trained.architecture, dataset, split, preds_kwh)


def persistence_baseline(dataset: WindowedDataset, split: str = "test") -> np.ndarray:
    """Naive day-ahead forecast: repeat the input window's 24 hours, in kWh."""
    idx = dataset.indices(split)
    return dataset.input_kwh[idx].copy()


def persistence_rows(dataset: WindowedDataset, split: str = "test") -> list[MetricRow]:
    return season_rows("Persistence", dataset, split, persistence_baseline(dataset, split))
