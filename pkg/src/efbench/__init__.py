"""Day-ahead (24 h) residential energy-load forecasting bench.

Everything numeric is built on a small float64 tensor core with reverse-mode
automatic differentiation; no external ML framework is used. The package
covers the full pipeline: hourly CSV ingest / synthetic data generation,
MinMax scaling, sliding-window construction, thirteen forecasting models,
a grid-search training harness, and seasonal SMAPE/MAE/RMSE reporting.
"""

__version__ = "0.1.0"

from efbench.autodiff import Tensor, Parameter, Tape
from efbench.rng import RngStream

__all__ = ["Tensor", "Parameter", "Tape", "RngStream", "__version__"]
