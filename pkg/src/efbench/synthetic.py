"""Synthetic residence-style consumption data.

Hourly energy is a base load plus daily / weekly / annual cycles, a
temperature-coupled heating-and-cooling term, multiplicative vacation dips,
and Gaussian noise, clipped at zero. Temperature is an annual sinusoid plus
a daily sinusoid plus noise. Everything is deterministic per seed.
"""

import json
from dataclasses import dataclass, field, asdict
from datetime import datetime, timedelta

import numpy as np

from efbench.data import TimeSeriesFrame, DataError
from efbench.rng import RngStream


@dataclass
class DipWindow:
    """Yearly recurring load dip: load is scaled by ``factor`` between
    (start_month, start_day) and (end_month, end_day), inclusive."""

    start_month: int
    start_day: int
    end_month: int
    end_day: int
    factor: float

    def active(self, month: int, day: int) -> bool:
        start = (self.start_month, self.start_day)
        end = (self.end_month, self.end_day)
        key = (month, day)
        if start <= end:
            return start <= key <= end
        return key >= start or key <= end  # wraps the new year


@dataclass
class SyntheticProfile:
    base_kwh: float = 100.0
    daily_amplitude: float = 30.0        # evening-peak daily cycle
    weekly_amplitude: float = 10.0       # weekday vs weekend
    annual_amplitude: float = 20.0       # winter-peaking seasonal load
    temp_coefficient: float = 0.8        # kWh per degree C away from comfort
    comfort_temp_c: float = 18.0
    noise_sigma: float = 6.0
    temp_mean_c: float = 8.0             # annual mean temperature
    temp_annual_amplitude: float = 14.0
    temp_daily_amplitude: float = 4.0
    temp_noise_sigma: float = 1.5
    dips: list = field(default_factory=lambda: [
        DipWindow(7, 1, 8, 20, 0.55),    # summer vacation
        DipWindow(12, 20, 1, 5, 0.70),   # winter break
    ])

    def __post_init__(self):
        self.dips = [d if isinstance(d, DipWindow) else DipWindow(**d) for d in self.dips]
        for name in ("base_kwh", "daily_amplitude", "weekly_amplitude", "annual_amplitude",
                     "temp_coefficient", "noise_sigma", "temp_annual_amplitude",
                     "temp_daily_amplitude", "temp_noise_sigma"):
            if getattr(self, name) < 0:
                raise DataError(f"synthetic profile: {name} must be non-negative")
        for dip in self.dips:
            if not (0 <= dip.factor <= 1.5):
                raise DataError(f"synthetic profile: dip factor {dip.factor} out of range")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_file(cls, path) -> "SyntheticProfile":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(**raw)


def generate_synthetic(profile: SyntheticProfile, start: datetime, hours: int,
                       seed: int) -> TimeSeriesFrame:
    """Deterministic synthetic frame of ``hours`` hourly rows from ``start``."""
    if hours < 48:
        raise DataError(f"need >= 48 hours for one window/target pair, got {hours}")
    rng = RngStream(seed, "synthetic")
    timestamps = [start + timedelta(hours=i) for i in range(hours)]
    doy = np.array([t.timetuple().tm_yday for t in timestamps], dtype=np.float64)
    hour = np.array([t.hour for t in timestamps], dtype=np.float64)
    dow = np.array([t.weekday() for t in timestamps], dtype=np.float64)
    month = np.array([t.month for t in timestamps])
    day = np.array([t.day for t in timestamps])

    annual_phase = 2 * np.pi * (doy - 15) / 365.25
    temperature = (profile.temp_mean_c
                   - profile.temp_annual_amplitude * np.cos(annual_phase)
                   + profile.temp_daily_amplitude * np.sin(2 * np.pi * (hour - 9) / 24))
    if profile.temp_noise_sigma > 0:
        temperature = temperature + rng.normal(0.0, profile.temp_noise_sigma, hours)
    temperature = np.clip(temperature, -60.0, 60.0)

    load = np.full(hours, profile.base_kwh)
    # evening-peaking daily cycle
    load = load + profile.daily_amplitude * np.sin(2 * np.pi * (hour - 13) / 24)
    # weekdays run hotter than weekends
    load = load + profile.weekly_amplitude * np.where(dow < 5, 0.5, -1.0)
    # winter-peaking annual cycle
    load = load + profile.annual_amplitude * np.cos(annual_phase)
    load = load + profile.temp_coefficient * np.abs(temperature - profile.comfort_temp_c)

    dip = np.ones(hours)
    for window in profile.dips:
        mask = np.fromiter((window.active(m, d) for m, d in zip(month, day)),
                           dtype=bool, count=hours)
        dip = np.where(mask, dip * window.factor, dip)
    load = load * dip

    if profile.noise_sigma > 0:
        load = load + rng.normal(0.0, profile.noise_sigma, hours)
    energy = np.maximum(load, 0.0)

    return TimeSeriesFrame(timestamps, temperature, energy)
