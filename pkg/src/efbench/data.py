"""Hourly consumption data: ingest, calendar features, scaling, windowing.

The feature order is fixed everywhere: day_of_year, day_of_month,
day_of_week (0 = Monday), hour, temperature, energy. Input windows cover 24
consecutive hours; targets are the following 24 hours of energy.
"""

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

FEATURES = ("day_of_year", "day_of_month", "day_of_week", "hour", "temperature", "energy")
N_FEATURES = len(FEATURES)
WINDOW = 24
HORIZON = 24

SEASONS = ("Winter", "Spring", "Summer", "Fall")
_MONTH_SEASON = {12: "Winter", 1: "Winter", 2: "Winter",
                 3: "Spring", 4: "Spring", 5: "Spring",
                 6: "Summer", 7: "Summer", 8: "Summer",
                 9: "Fall", 10: "Fall", 11: "Fall"}

TEMP_MIN, TEMP_MAX = -60.0, 60.0


class DataError(ValueError):
    """Raised for malformed input data; carries the offending line when known."""


@dataclass
class TimeSeriesFrame:
    """Gap-free hourly records plus calendar features derived from the stamps."""

    timestamps: list              # naive datetimes, strictly +1 h apart
    temperature: np.ndarray
    energy: np.ndarray
    day_of_year: np.ndarray = field(default=None)
    day_of_month: np.ndarray = field(default=None)
    day_of_week: np.ndarray = field(default=None)
    hour: np.ndarray = field(default=None)

    def __post_init__(self):
        self.temperature = np.asarray(self.temperature, dtype=np.float64)
        self.energy = np.asarray(self.energy, dtype=np.float64)
        if self.day_of_year is None:
            derived = derive_calendar(self.timestamps)
            self.day_of_year, self.day_of_month, self.day_of_week, self.hour = derived
        self.validate()

    def __len__(self):
        return len(self.timestamps)

    def validate(self):
        n = len(self.timestamps)
        if not (len(self.temperature) == len(self.energy) == n):
            raise DataError("frame columns disagree in length")
        for i in range(1, n):
            if self.timestamps[i] - self.timestamps[i - 1] != timedelta(hours=1):
                raise DataError(f"timestamps not hourly/monotone at row {i}: "
                                f"{self.timestamps[i - 1]} -> {self.timestamps[i]}")
        if np.any(self.energy < 0):
            bad = int(np.argmax(self.energy < 0))
            raise DataError(f"negative energy at row {bad}: {self.energy[bad]}")
        if np.any(self.temperature < TEMP_MIN) or np.any(self.temperature > TEMP_MAX):
            raise DataError("temperature outside sanity bounds [-60, 60] C")
        recomputed = derive_calendar(self.timestamps)
        for name, stored, fresh in zip(FEATURES[:4],
                                       (self.day_of_year, self.day_of_month,
                                        self.day_of_week, self.hour), recomputed):
            if not np.array_equal(np.asarray(stored), fresh):
                raise DataError(f"derived feature {name} inconsistent with timestamps")

    def feature_matrix(self) -> np.ndarray:
        """(N, 6) float matrix in the fixed feature order."""
        return np.column_stack([
            self.day_of_year.astype(np.float64),
            self.day_of_month.astype(np.float64),
            self.day_of_week.astype(np.float64),
            self.hour.astype(np.float64),
            self.temperature,
            self.energy,
        ])

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "temperature", "energy"])
            for ts, temp, en in zip(self.timestamps, self.temperature, self.energy):
                writer.writerow([ts.isoformat(), format_number(temp), format_number(en)])


def format_number(x: float) -> str:
    """Canonical float formatting for emitted CSVs (round-trips at 1e-12 rel)."""
    return format(float(x), ".12g")


def derive_calendar(timestamps):
    doy = np.array([t.timetuple().tm_yday for t in timestamps], dtype=np.int64)
    dom = np.array([t.day for t in timestamps], dtype=np.int64)
    dow = np.array([t.weekday() for t in timestamps], dtype=np.int64)
    hour = np.array([t.hour for t in timestamps], dtype=np.int64)
    return doy, dom, dow, hour


@dataclass
class IngestSummary:
    rows_read: int = 0
    rows_imputed: int = 0
    imputed_timestamps: list = field(default_factory=list)


def _parse_timestamp(text: str, line_no: int) -> datetime:
    try:
        ts = datetime.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"line {line_no}: unparseable timestamp {text!r}") from None
    if ts.tzinfo is not None:
        raise DataError(f"line {line_no}: timezone-aware timestamps are not supported")
    if ts.minute or ts.second or ts.microsecond:
        raise DataError(f"line {line_no}: timestamp {text!r} is not on the hour")
    return ts


def ingest_csv(path, impute_max_gap_hours: int = 0):
    """Read `timestamp,temperature,energy` rows into a validated frame.

    Gaps of at most ``impute_max_gap_hours`` missing rows are filled by
    linear interpolation and flagged in the returned summary; longer gaps
    are errors, as are non-monotone stamps, negative energy, and any row
    that fails to parse.

    Returns (TimeSeriesFrame, IngestSummary).
    """
    timestamps, temps, energies = [], [], []
    summary = IngestSummary()
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file") from None
        if [h.strip() for h in header] != ["timestamp", "temperature", "energy"]:
            raise DataError(f"expected header 'timestamp,temperature,energy', got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise DataError(f"line {line_no}: expected 3 fields, got {len(row)}")
            ts = _parse_timestamp(row[0], line_no)
            try:
                temp = float(row[1])
                energy = float(row[2])
            except ValueError:
                raise DataError(f"line {line_no}: non-numeric value in {row[1:]!r}") from None
            if not np.isfinite(temp) or not np.isfinite(energy):
                raise DataError(f"line {line_no}: non-finite value")
            if energy < 0:
                raise DataError(f"line {line_no}: negative energy {energy}")
            if not (TEMP_MIN <= temp <= TEMP_MAX):
                raise DataError(f"line {line_no}: temperature {temp} outside [-60, 60]")
            summary.rows_read += 1

            if timestamps:
                delta = ts - timestamps[-1]
                if delta <= timedelta(0):
                    raise DataError(f"line {line_no}: non-monotone timestamp {ts}")
                missing = int(delta / timedelta(hours=1)) - 1
                if missing > impute_max_gap_hours:
                    raise DataError(
                        f"line {line_no}: gap of {missing} h exceeds impute limit "
                        f"of {impute_max_gap_hours} h")
                prev_ts, prev_temp, prev_energy = timestamps[-1], temps[-1], energies[-1]
                for k in range(1, missing + 1):
                    frac = k / (missing + 1)
                    timestamps.append(prev_ts + timedelta(hours=k))
                    temps.append(prev_temp + frac * (temp - prev_temp))
                    energies.append(prev_energy + frac * (energy - prev_energy))
                    summary.rows_imputed += 1
                    summary.imputed_timestamps.append(timestamps[-1])
            timestamps.append(ts)
            temps.append(temp)
            energies.append(energy)

    if not timestamps:
        raise DataError("no data rows")
    frame = TimeSeriesFrame(timestamps, np.array(temps), np.array(energies))
    return frame, summary


# ---------------------------------------------------------------------------
# MinMax scaling
# ---------------------------------------------------------------------------

@dataclass
class ScalerParams:
    """Per-feature min/max fitted on the training region only."""

    x_min: np.ndarray
    x_max: np.ndarray

    def __post_init__(self):
        self.x_min = np.asarray(self.x_min, dtype=np.float64)
        self.x_max = np.asarray(self.x_max, dtype=np.float64)
        if self.x_min.shape != (N_FEATURES,) or self.x_max.shape != (N_FEATURES,):
            raise DataError("scaler params must cover the 6 fixed features")
        if np.any(self.x_max < self.x_min):
            raise DataError("scaler has x_max < x_min")

    @property
    def degenerate(self) -> np.ndarray:
        return self.x_max == self.x_min

    @property
    def span(self) -> np.ndarray:
        return np.where(self.degenerate, 1.0, self.x_max - self.x_min)


def fit_scaler(frame: TimeSeriesFrame, train_fraction: float = 0.70) -> ScalerParams:
    """Min/max over the first ``train_fraction`` of rows; constant features
    are marked degenerate and later scale to 0."""
    n_train = int(np.floor(train_fraction * len(frame)))
    if n_train < 1:
        raise DataError("empty training region for scaler fit")
    mat = frame.feature_matrix()[:n_train]
    return ScalerParams(mat.min(axis=0), mat.max(axis=0))


def scale(values: np.ndarray, params: ScalerParams) -> np.ndarray:
    """(X - X_min) / (X_max - X_min) along the last axis (6 features).

    Values outside the fitted range scale outside [0, 1]; that is expected
    for validation/test regions and left untouched.
    """
    scaled = (values - params.x_min) / params.span
    if np.any(params.degenerate):
        scaled = np.where(params.degenerate, 0.0, scaled)
    return scaled


def inverse_scale(scaled: np.ndarray, params: ScalerParams) -> np.ndarray:
    return np.where(params.degenerate, params.x_min, scaled * params.span + params.x_min)


def scale_energy(values: np.ndarray, params: ScalerParams) -> np.ndarray:
    if params.degenerate[5]:
        return np.zeros_like(values)
    return (values - params.x_min[5]) / (params.x_max[5] - params.x_min[5])


def inverse_scale_energy(scaled: np.ndarray, params: ScalerParams) -> np.ndarray:
    if params.degenerate[5]:
        return np.full_like(scaled, params.x_min[5])
    return scaled * (params.x_max[5] - params.x_min[5]) + params.x_min[5]


# ---------------------------------------------------------------------------
# Sliding windows, chronological split, season labels
# ---------------------------------------------------------------------------

SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST = "train", "val", "test"


@dataclass
class WindowedDataset:
    """Paired (24 x 6 input, 24-hour energy target) samples, stride one."""

    inputs: np.ndarray        # (S, 24, 6) scaled
    targets: np.ndarray       # (S, 24) scaled energy
    target_kwh: np.ndarray    # (S, 24) unscaled energy
    input_kwh: np.ndarray     # (S, 24) unscaled energy of the input window
    target_start: list        # datetime of each sample's first target hour
    season: np.ndarray        # (S,) strings from SEASONS
    split: np.ndarray         # (S,) strings train/val/test
    scaler: ScalerParams

    def __len__(self):
        return self.inputs.shape[0]

    def indices(self, split: str) -> np.ndarray:
        return np.flatnonzero(self.split == split)

    def subset(self, split: str):
        idx = self.indices(split)
        return self.inputs[idx], self.targets[idx]


def assign_season(target_start: datetime) -> str:
    """Meteorological season of the target window's first hour."""
    return _MONTH_SEASON[target_start.month]


def sliding_window(frame: TimeSeriesFrame, scaler: ScalerParams,
                   window: int = WINDOW, horizon: int = HORIZON) -> WindowedDataset:
    """All stride-1 (input, target) pairs: N - window - horizon + 1 samples."""
    n = len(frame)
    n_samples = n - window - horizon + 1
    if n_samples < 1:
        raise DataError(f"frame of {n} rows is too short for window {window} + horizon {horizon}")

    mat = frame.feature_matrix()
    scaled = scale(mat, scaler)
    starts = np.arange(n_samples)
    win_idx = starts[:, None] + np.arange(window)[None, :]
    tgt_idx = starts[:, None] + window + np.arange(horizon)[None, :]

    inputs = scaled[win_idx]                        # (S, 24, 6)
    target_kwh = frame.energy[tgt_idx]              # (S, 24)
    input_kwh = frame.energy[win_idx]
    targets = scale_energy(target_kwh, scaler)
    target_start = [frame.timestamps[s + window] for s in range(n_samples)]
    season = np.array([assign_season(ts) for ts in target_start])
    split = np.full(n_samples, SPLIT_TRAIN, dtype=object)
    ds = WindowedDataset(inputs, targets, target_kwh, input_kwh,
                         target_start, season, np.asarray(split, dtype="U5"), scaler)
    return ds


def chronological_split(ds: WindowedDataset, train: float = 0.70, val: float = 0.10) -> None:
    """Label samples train/val/test in source-time order: floor(train*S) then
    floor(val*S), remainder to test. No shuffling."""
    s = len(ds)
    if s < 10:
        raise DataError(f"need at least 10 samples to split, got {s}")
    n_train = int(np.floor(train * s))
    n_val = int(np.floor(val * s))
    labels = np.empty(s, dtype="U5")
    labels[:n_train] = SPLIT_TRAIN
    labels[n_train:n_train + n_val] = SPLIT_VAL
    labels[n_train + n_val:] = SPLIT_TEST
    ds.split = labels


def build_dataset(frame: TimeSeriesFrame, train_fraction: float = 0.70,
                  val_fraction: float = 0.10) -> WindowedDataset:
    """ingest -> scaler -> windows -> chronological split, in one call."""
    scaler = fit_scaler(frame, train_fraction)
    ds = sliding_window(frame, scaler)
    chronological_split(ds, train_fraction, val_fraction)
    return ds
