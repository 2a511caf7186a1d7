"""Report emission: metric tables, prediction dumps, and charts.

Writes, per run: ``metrics.csv`` (model,season,mae,rmse,smape,n; ALL block
first, then each season, sorted by SMAPE), one prediction CSV per model
(timestamp,actual_kwh,predicted_kwh,horizon_hour), a self-contained SVG
line chart overlaying the actual series with the top-4 models by SMAPE,
and matplotlib renderings of the same comparisons as PNG files.
"""

import csv
from datetime import timedelta
from pathlib import Path

import numpy as np

from efbench.data import SEASONS
from efbench.evaluation import ALL_SEASONS, EvaluationReport, MetricRow

CHART_DAYS = 7
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def fmt(x: float) -> str:
    """Six significant digits, the CSV number format."""
    return format(float(x), ".6g")


def write_metrics_csv(report: EvaluationReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "season", "mae", "rmse", "smape", "n"])
        for season in (ALL_SEASONS,) + SEASONS:
            for row in report.for_season(season):
                writer.writerow([row.model, row.season, fmt(row.mae), fmt(row.rmse),
                                 fmt(row.smape), row.n])


def read_metrics_csv(path) -> EvaluationReport:
    report = EvaluationReport()
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["model", "season", "mae", "rmse", "smape", "n"]:
            raise ValueError(f"unexpected metrics header {header}")
        for row in reader:
            report.rows.append(MetricRow(row[0], row[1], float(row[2]), float(row[3]),
                                         float(row[4]), int(row[5])))
    return report


def write_predictions_csv(path, target_starts, actual_kwh, predicted_kwh) -> None:
    """One row per (sample, horizon hour)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "actual_kwh", "predicted_kwh", "horizon_hour"])
        for s, start in enumerate(target_starts):
            for h in range(24):
                writer.writerow([(start + timedelta(hours=h)).isoformat(),
                                 fmt(actual_kwh[s, h]), fmt(predicted_kwh[s, h]), h])


def _chart_series(dataset, split, predictions: dict):
    """Concatenated day-ahead forecasts (stride 24) over the first chart week."""
    idx = dataset.indices(split)
    picks = idx[::24][:CHART_DAYS]
    local = np.searchsorted(idx, picks)
    hours = []
    for s in picks:
        start = dataset.target_start[s]
        hours.extend(start + timedelta(hours=h) for h in range(24))
    actual = dataset.target_kwh[picks].reshape(-1)
    series = {name: preds[local].reshape(-1) for name, preds in predictions.items()}
    return hours, actual, series


def top_models_by_smape(report: EvaluationReport, k: int = 4,
                        exclude=("Persistence",)) -> list[str]:
    ranked = [r.model for r in report.for_season(ALL_SEASONS) if r.model not in exclude]
    return ranked[:k]


def write_overlay_svg(path, hours, actual, series: dict) -> None:
    """Static SVG 1.1 line chart: one polyline for the actual series and one
    per model, nothing else polyline-shaped."""
    width, height = 960, 420
    ml, mr, mt, mb = 60, 20, 30, 50
    plot_w, plot_h = width - ml - mr, height - mt - mb
    names = list(series)
    everything = np.concatenate([actual] + [series[n] for n in names])
    lo, hi = float(everything.min()), float(everything.max())
    if hi == lo:
        hi = lo + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    n = len(actual)

    def sx(i):
        return ml + plot_w * i / max(n - 1, 1)

    def sy(v):
        return mt + plot_h * (1.0 - (v - lo) / (hi - lo))

    def polyline(values, color, dash=""):
        pts = " ".join(f"{sx(i):.2f},{sy(v):.2f}" for i, v in enumerate(values))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        return (f'<polyline fill="none" stroke="{color}" stroke-width="1.5"'
                f'{extra} points="{pts}"/>')

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + plot_h}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt + plot_h}" x2="{ml + plot_w}" y2="{mt + plot_h}" '
        f'stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = lo + frac * (hi - lo)
        y = sy(v)
        parts.append(f'<text x="{ml - 8}" y="{y + 4:.1f}" text-anchor="end" '
                     f'font-size="11" font-family="sans-serif">{v:.0f}</text>')
    parts.append(f'<text x="{ml + plot_w / 2}" y="{height - 12}" text-anchor="middle" '
                 f'font-size="12" font-family="sans-serif">hour of forecast window '
                 f'({len(hours)} h, day-ahead stride 24)</text>')
    parts.append(f'<text x="16" y="{mt + plot_h / 2}" font-size="12" '
                 f'font-family="sans-serif" transform="rotate(-90 16 {mt + plot_h / 2})" '
                 f'text-anchor="middle">energy (kWh)</text>')

    parts.append(polyline(actual, "#222222"))
    for i, name in enumerate(names):
        parts.append(polyline(series[name], PALETTE[i % len(PALETTE)]))

    lx = ml + 10
    parts.append(f'<text x="{lx}" y="{mt + 14}" font-size="12" font-weight="bold" '
                 f'font-family="sans-serif" fill="#222222">actual</text>')
    for i, name in enumerate(names):
        parts.append(f'<text x="{lx}" y="{mt + 30 + 16 * i}" font-size="12" '
                     f'font-family="sans-serif" '
                     f'fill="{PALETTE[i % len(PALETTE)]}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts), encoding="utf-8")


# ---------------------------------------------------------------------------
# matplotlib renderings
# ---------------------------------------------------------------------------

def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_metric_bars(report: EvaluationReport, path) -> None:
    plt = _plt()
    rows = report.for_season(ALL_SEASONS)
    names = [r.model for r in rows]
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(max(8, 0.8 * len(names)), 4.5))
    ax.bar(x - 0.25, [r.mae for r in rows], 0.25, label="MAE (kWh)")
    ax.bar(x, [r.rmse for r in rows], 0.25, label="RMSE (kWh)")
    ax.bar(x + 0.25, [r.smape for r in rows], 0.25, label="SMAPE (%)")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=45, ha="right")
    ax.set_title("Test error by model (sorted by SMAPE)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_seasonal_smape(report: EvaluationReport, path) -> None:
    plt = _plt()
    models = [r.model for r in report.for_season(ALL_SEASONS)]
    seasons = [s for s in SEASONS if report.for_season(s)]
    x = np.arange(len(models))
    width = 0.8 / max(len(seasons), 1)
    fig, ax = plt.subplots(figsize=(max(8, 0.8 * len(models)), 4.5))
    for i, season in enumerate(seasons):
        by_model = {r.model: r.smape for r in report.for_season(season)}
        vals = [by_model.get(m, np.nan) for m in models]
        ax.bar(x + (i - (len(seasons) - 1) / 2) * width, vals, width, label=season)
    ax.set_xticks(x)
    ax.set_xticklabels(models, rotation=45, ha="right")
    ax.set_ylabel("SMAPE (%)")
    ax.set_title("Seasonal SMAPE by model")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_overlay(path, hours, actual, series: dict) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(11, 4.5))
    xs = np.arange(len(actual))
    ax.plot(xs, actual, color="#222222", lw=1.6, label="actual")
    for i, (name, vals) in enumerate(series.items()):
        ax.plot(xs, vals, color=PALETTE[i % len(PALETTE)], lw=1.2, label=name)
    ticks = xs[::24]
    ax.set_xticks(ticks)
    ax.set_xticklabels([hours[t].strftime("%m-%d") for t in ticks], rotation=0)
    ax.set_ylabel("energy (kWh)")
    ax.set_title("Actual vs day-ahead forecasts (top models by SMAPE)")
    ax.legend(ncol=3, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def read_predictions_csv(path):
    """Inverse of write_predictions_csv: (target_starts, actual, predicted)."""
    from datetime import datetime

    starts, actual, predicted = [], [], []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["timestamp", "actual_kwh", "predicted_kwh", "horizon_hour"]:
            raise ValueError(f"unexpected predictions header {header}")
        for row in reader:
            if int(row[3]) == 0:
                starts.append(datetime.fromisoformat(row[0]))
                actual.append([])
                predicted.append([])
            actual[-1].append(float(row[1]))
            predicted[-1].append(float(row[2]))
    return starts, np.asarray(actual), np.asarray(predicted)


def regenerate_overlay(report: EvaluationReport, run_dir) -> int:
    """Rebuild the overlay charts from persisted prediction CSVs; returns the
    number of chart files written (0 when no prediction CSVs exist)."""
    run_dir = Path(run_dir)
    available = {p.stem[len("predictions_"):]: p
                 for p in run_dir.glob("predictions_*.csv")}
    top = [m for m in top_models_by_smape(report, 4) if m in available]
    if not top:
        return 0
    starts, actual, _ = read_predictions_csv(available[top[0]])
    picks = np.arange(0, len(starts), 24)[:CHART_DAYS]
    hours = []
    for s in picks:
        hours.extend(starts[s] + timedelta(hours=h) for h in range(24))
    actual_series = actual[picks].reshape(-1)
    series = {}
    for name in top:
        _, _, predicted = read_predictions_csv(available[name])
        series[name] = predicted[picks].reshape(-1)
    write_overlay_svg(run_dir / "forecast_overlay.svg", hours, actual_series, series)
    plot_overlay(run_dir / "forecast_overlay.png", hours, actual_series, series)
    return 2


def emit_report(report: EvaluationReport, out_dir, dataset=None, split: str = "test",
                predictions: dict | None = None, top_k: int = 4) -> list[Path]:
    """Write the full report bundle into ``out_dir``; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not report.rows:
        raise ValueError("emit_report: empty report")
    written = []

    metrics_path = out / "metrics.csv"
    write_metrics_csv(report, metrics_path)
    written.append(metrics_path)

    if predictions and dataset is not None:
        idx = dataset.indices(split)
        actual = dataset.target_kwh[idx]
        starts = [dataset.target_start[i] for i in idx]
        for name, preds in predictions.items():
            path = out / f"predictions_{name}.csv"
            write_predictions_csv(path, starts, actual, preds)
            written.append(path)

        top = [m for m in top_models_by_smape(report, top_k) if m in predictions]
        hours, actual_series, series = _chart_series(
            dataset, split, {m: predictions[m] for m in top})
        svg_path = out / "forecast_overlay.svg"
        write_overlay_svg(svg_path, hours, actual_series, series)
        written.append(svg_path)
        png_path = out / "forecast_overlay.png"
        plot_overlay(png_path, hours, actual_series, series)
        written.append(png_path)

    bars_path = out / "metrics_by_model.png"
    plot_metric_bars(report, bars_path)
    written.append(bars_path)
    seasonal_path = out / "seasonal_smape.png"
    plot_seasonal_smape(report, seasonal_path)
    written.append(seasonal_path)
    return written
