"""Forecast error metrics in kWh space.

SMAPE is the symmetric percentage form 100 * mean(2|y - p| / (|y| + |p|)),
bounded in [0, 200]; a term whose denominator is zero (both actual and
predicted zero) contributes zero. MAE and RMSE are the plain first and
second power means of the absolute errors.
"""

import numpy as np


def _check(actuals, preds, name):
    a = np.asarray(actuals, dtype=np.float64).reshape(-1)
    p = np.asarray(preds, dtype=np.float64).reshape(-1)
    if a.size != p.size:
        raise ValueError(f"{name}: length mismatch {a.size} vs {p.size}")
    if a.size == 0:
        raise ValueError(f"{name}: empty inputs")
    return a, p


def smape(actuals, preds) -> float:
    """Symmetric mean absolute percentage error, in percent."""
    a, p = _check(actuals, preds, "smape")
    denom = np.abs(a) + np.abs(p)
    terms = np.where(denom == 0.0, 0.0, 2.0 * np.abs(a - p) / np.where(denom == 0.0, 1.0, denom))
    return 100.0 * float(terms.mean())


def mae(actuals, preds) -> float:
    a, p = _check(actuals, preds, "mae")
    return float(np.abs(a - p).mean())


def rmse(actuals, preds) -> float:
    a, p = _check(actuals, preds, "rmse")
    d = a - p
    return float(np.sqrt((d * d).mean()))
