"""Hourly multivariate data handling: ingestion, repair, encoding, windowing.

The file schema is delimited text with the header::

    timestamp,pm25,pm10,no2,so2,o3,co,wind_speed,wind_dir,temperature,precipitation,pressure,humidity,weather

Timestamps are ISO-8601; an empty field means missing.  On ingestion the
rows are placed on a strict hourly grid (gaps become missing rows), wind
speed/direction are converted to signed components, and the time-derived
categorical fields (month, day of week, hour) are attached.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta

import numpy as np

from .decomposition import DecompositionResult, emd

__all__ = [
    "TimeSeriesFrame",
    "SupervisedDataset",
    "StandardScaler",
    "LabelEncoder",
    "OneHotEncoder",
    "SchemaError",
    "OrderingError",
    "PipelineError",
    "PlausibilityWarning",
    "FILE_COLUMNS",
    "CONTINUOUS_COLUMNS",
    "CATEGORICAL_COLUMNS",
    "WEATHER_CATEGORIES",
    "PLAUSIBLE_RANGES",
    "ingest",
    "write_frame",
    "interpolate_missing",
    "wind_to_components",
    "components_to_wind",
    "attach_decomposition",
    "make_windows",
    "split_chronological",
    "split_sizes",
    "split_rows_by_date",
]


class SchemaError(ValueError):
    """Input file header does not match the documented schema."""


class OrderingError(ValueError):
    """Timestamps are duplicated or not increasing."""


class PipelineError(ValueError):
    """Invalid pipeline operation (bad ranges, lengths, or arguments)."""


class PlausibilityWarning(UserWarning):
    """A value fell outside its documented plausible range."""


FILE_COLUMNS = (
    "timestamp", "pm25", "pm10", "no2", "so2", "o3", "co",
    "wind_speed", "wind_dir", "temperature", "precipitation",
    "pressure", "humidity", "weather",
)

CONTINUOUS_COLUMNS = (
    "pm25", "pm10", "no2", "so2", "o3", "co",
    "wind_x", "wind_y", "temperature", "precipitation", "pressure", "humidity",
)

CATEGORICAL_COLUMNS = ("weather", "month", "day_of_week", "hour")

CATEGORICAL_CARDINALITIES = {"weather": 20, "month": 12, "day_of_week": 7, "hour": 24}

WEATHER_CATEGORIES = (
    "Sunny", "Fine with occasional clouds", "Cloudy", "Overcast",
    "Light snow", "Moderate snow", "Snow shower", "Sleet", "Light rain",
    "Drizzle", "Shower", "Strong shower", "Thunder shower", "Moderate rain",
    "Heavy rain", "Mist", "Haze", "Fog", "Floating dust", "Sand blowing",
)

# Documented plausible ranges; excursions warn but never reject rows.
PLAUSIBLE_RANGES = {
    "pm25": (2.0, 692.0),
    "pm10": (1.0, 1000.0),
    "no2": (2.0, 192.0),
    "so2": (1.0, 248.0),
    "o3": (1.0, 339.0),
    "co": (0.13, 9.63),
    "wind_x": (-44.0, 48.86),
    "wind_y": (-54.16, 44.43),
    "temperature": (-17.0, 46.0),
    "precipitation": (0.0, 251.7),
    "pressure": (992.0, 1047.0),
    "humidity": (5.0, 97.0),
}

_HOUR = timedelta(hours=1)


def wind_to_components(speed, direction_deg):
    """Convert meteorological wind (speed, direction-from in degrees) to
    signed components pointing toward where the air moves.

    A southerly wind (180 deg) blows toward the north: (0, +speed).
    """
    speed = np.asarray(speed, dtype=np.float64)
    direction = np.asarray(direction_deg, dtype=np.float64)
    if np.any(speed[~np.isnan(speed)] < 0):
        raise PipelineError("wind speed must be non-negative")
    rad = np.deg2rad(direction)
    return -speed * np.sin(rad), -speed * np.cos(rad)


def components_to_wind(wind_x, wind_y):
    """Inverse of :func:`wind_to_components`; calm air maps to direction 0."""
    wind_x = np.asarray(wind_x, dtype=np.float64)
    wind_y = np.asarray(wind_y, dtype=np.float64)
    speed = np.hypot(wind_x, wind_y)
    direction = np.degrees(np.arctan2(-wind_x, -wind_y)) % 360.0
    direction = np.where(speed == 0.0, 0.0, direction)
    return speed, direction


@dataclass
class TimeSeriesFrame:
    """Hourly table of continuous and categorical variables.

    ``continuous`` is ``[N, len(continuous_names)]`` float64 with NaN for
    missing cells; ``weather`` holds raw category strings (empty string =
    missing); month / day-of-week / hour are derived from the timestamps.
    """

    timestamps: list[datetime]
    continuous: np.ndarray
    continuous_names: list[str]
    weather: np.ndarray  # dtype=object strings

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.continuous)

    def column(self, name: str) -> np.ndarray:
        return self.continuous[:, self.continuous_names.index(name)]

    def month_codes(self) -> np.ndarray:
        return np.array([ts.month - 1 for ts in self.timestamps], dtype=np.int64)

    def day_of_week_codes(self) -> np.ndarray:
        return np.array([ts.weekday() for ts in self.timestamps], dtype=np.int64)

    def hour_codes(self) -> np.ndarray:
        return np.array([ts.hour for ts in self.timestamps], dtype=np.int64)

    def copy(self) -> "TimeSeriesFrame":
        return TimeSeriesFrame(
            timestamps=list(self.timestamps),
            continuous=self.continuous.copy(),
            continuous_names=list(self.continuous_names),
            weather=self.weather.copy(),
        )


def _parse_float(token: str) -> float:
    token = token.strip()
    if not token:
        return math.nan
    return float(token)


def _check_plausible(name: str, values: np.ndarray) -> None:
    bounds = PLAUSIBLE_RANGES.get(name)
    if bounds is None:
        return
    lo, hi = bounds
    finite = values[~np.isnan(values)]
    n_out = int(np.count_nonzero((finite < lo) | (finite > hi)))
    if n_out:
        warnings.warn(
            f"{name}: {n_out} value(s) outside plausible range [{lo}, {hi}]",
            PlausibilityWarning,
            stacklevel=3,
        )


def ingest(path) -> TimeSeriesFrame:
    """Read a delimited data file into a frame on a strict hourly grid.

    Hours absent from the file become fully-missing rows.  Duplicate or
    backwards timestamps are rejected.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != FILE_COLUMNS:
            unknown = [h for h in header if h.strip() not in FILE_COLUMNS]
            if unknown:
                raise SchemaError(f"{path}: unknown column(s) {unknown}")
            raise SchemaError(
                f"{path}: header must be exactly {','.join(FILE_COLUMNS)}"
            )
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(FILE_COLUMNS):
                raise SchemaError(
                    f"{path}:{line_no}: expected {len(FILE_COLUMNS)} fields, got {len(row)}"
                )
            try:
                ts = datetime.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise SchemaError(f"{path}:{line_no}: bad timestamp {row[0]!r}") from exc
            rows.append((ts, row, line_no))

    if not rows:
        raise SchemaError(f"{path}: no data rows")
    for (ts_a, _, ln_a), (ts_b, _, ln_b) in zip(rows, rows[1:]):
        if ts_b == ts_a:
            raise OrderingError(f"{path}:{ln_b}: duplicate timestamp {ts_b.isoformat()}")
        if ts_b < ts_a:
            raise OrderingError(
                f"{path}:{ln_b}: timestamp {ts_b.isoformat()} precedes {ts_a.isoformat()}"
            )

    start, end = rows[0][0], rows[-1][0]
    n = int((end - start) / _HOUR) + 1
    timestamps = [start + i * _HOUR for i in range(n)]
    continuous = np.full((n, len(CONTINUOUS_COLUMNS)), np.nan)
    weather = np.full(n, "", dtype=object)
    raw_cols = {name: np.full(n, np.nan) for name in FILE_COLUMNS[1:13]}
    for ts, row, line_no in rows:
        offset = (ts - start) / _HOUR
        i = int(offset)
        if offset != i:
            raise OrderingError(
                f"{path}:{line_no}: timestamp {ts.isoformat()} is not on the hourly grid"
            )
        for j, name in enumerate(FILE_COLUMNS[1:13], start=1):
            raw_cols[name][i] = _parse_float(row[j])
        weather[i] = row[13].strip()

    speed, direction = raw_cols["wind_speed"], raw_cols["wind_dir"]
    wind_x, wind_y = wind_to_components(np.nan_to_num(speed, nan=0.0), direction)
    have_wind = ~np.isnan(speed) & ~np.isnan(direction)
    names = list(CONTINUOUS_COLUMNS)
    for name in ("pm25", "pm10", "no2", "so2", "o3", "co",
                 "temperature", "precipitation", "pressure", "humidity"):
        continuous[:, names.index(name)] = raw_cols[name]
    continuous[:, names.index("wind_x")] = np.where(have_wind, wind_x, np.nan)
    continuous[:, names.index("wind_y")] = np.where(have_wind, wind_y, np.nan)

    for name in CONTINUOUS_COLUMNS:
        _check_plausible(name, continuous[:, names.index(name)])

    return TimeSeriesFrame(
        timestamps=timestamps,
        continuous=continuous,
        continuous_names=names,
        weather=weather,
    )


def write_frame(path, frame: TimeSeriesFrame) -> None:
    """Write a frame back to the documented file schema.

    Wind components are folded back into speed/direction; extra continuous
    columns (e.g. attached decomposition channels) are not written.
    """
    speed, direction = components_to_wind(frame.column("wind_x"), frame.column("wind_y"))

    def fmt(v: float) -> str:
        return "" if math.isnan(v) else repr(float(v))

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(FILE_COLUMNS) + "\n")
        for i, ts in enumerate(frame.timestamps):
            cells = [ts.isoformat(sep=" ")]
            for name in ("pm25", "pm10", "no2", "so2", "o3", "co"):
                cells.append(fmt(frame.column(name)[i]))
            cells.append(fmt(speed[i]))
            cells.append(fmt(direction[i]))
            for name in ("temperature", "precipitation", "pressure", "humidity"):
                cells.append(fmt(frame.column(name)[i]))
            cells.append(str(frame.weather[i]))
            fh.write(",".join(cells) + "\n")


def interpolate_missing(frame: TimeSeriesFrame) -> TimeSeriesFrame:
    """Fill missing cells: interior gaps linearly, ends by nearest value;
    missing weather repeats the previous observation (head backfills)."""
    out = frame.copy()
    n = out.n_rows
    idx = np.arange(n, dtype=np.float64)
    for j, name in enumerate(out.continuous_names):
        col = out.continuous[:, j]
        good = ~np.isnan(col)
        if not good.any():
            raise PipelineError(f"column {name!r} has no observed values")
        if good.all():
            continue
        # np.interp is linear between neighbors and flat beyond the ends.
        out.continuous[:, j] = np.interp(idx, idx[good], col[good])

    observed = [i for i in range(n) if out.weather[i]]
    if not observed:
        raise PipelineError("weather column has no observed values")
    first = observed[0]
    last_seen = out.weather[first]
    for i in range(n):
        if out.weather[i]:
            last_seen = out.weather[i]
        else:
            out.weather[i] = last_seen if i > first else out.weather[first]
    return out


# ---------------------------------------------------------------------------
# scaling and encoding


@dataclass
class StandardScaler:
    """Per-column standardization fit on training rows only.

    Zero-variance columns are flagged degenerate and transform to zeros.
    """

    mean_: np.ndarray | None = None
    std_: np.ndarray | None = None
    degenerate_: np.ndarray | None = None

    def get_params(self) -> dict:
        return {"mean": self.mean_, "std": self.std_}

    def fit(self, values: np.ndarray) -> "StandardScaler":
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            raise PipelineError("cannot fit scaler on an empty range")
        self.mean_ = values.mean(axis=0)
        self.std_ = values.std(axis=0)
        self.degenerate_ = self.std_ == 0.0
        return self

    def _check(self):
        if self.mean_ is None:
            raise PipelineError("scaler is not fit")

    def transform(self, values: np.ndarray) -> np.ndarray:
        self._check()
        safe = np.where(self.degenerate_, 1.0, self.std_)
        out = (np.asarray(values, dtype=np.float64) - self.mean_) / safe
        if self.degenerate_.any():
            out[:, self.degenerate_] = 0.0
        return out

    def fit_transform(self, values: np.ndarray) -> np.ndarray:
        return self.fit(values).transform(values)

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        self._check()
        safe = np.where(self.degenerate_, 1.0, self.std_)
        out = np.asarray(values, dtype=np.float64) * safe + self.mean_
        if self.degenerate_.any():
            out[:, self.degenerate_] = np.broadcast_to(
                self.mean_, out.shape
            )[:, self.degenerate_]
        return out


@dataclass
class LabelEncoder:
    """Stable integer codes for categories, unknowns mapped to a reserved
    trailing code so unseen test categories never fail."""

    vocabulary_: list[str] = field(default_factory=list)

    def get_params(self) -> dict:
        return {"vocabulary": list(self.vocabulary_)}

    @property
    def unknown_code(self) -> int:
        return len(self.vocabulary_)

    @property
    def n_codes(self) -> int:
        # Including the reserved unknown slot.
        return len(self.vocabulary_) + 1

    def fit(self, categories, canonical=None) -> "LabelEncoder":
        """Build the vocabulary in first-appearance order.

        ``canonical`` seeds the ordering (only entries actually observed
        are kept, in canonical order, followed by novel ones as they
        appear).
        """
        observed = list(dict.fromkeys(str(c) for c in categories))
        if canonical is not None:
            seen = set(observed)
            vocab = [c for c in canonical if c in seen]
            vocab += [c for c in observed if c not in set(vocab)]
        else:
            vocab = observed
        self.vocabulary_ = vocab
        return self

    def transform(self, categories) -> np.ndarray:
        index = {c: i for i, c in enumerate(self.vocabulary_)}
        unk = self.unknown_code
        return np.array([index.get(str(c), unk) for c in categories], dtype=np.int64)

    def inverse_transform(self, codes) -> list[str]:
        out = []
        for code in codes:
            code = int(code)
            out.append(self.vocabulary_[code] if code < len(self.vocabulary_) else "unknown")
        return out


@dataclass
class OneHotEncoder:
    """One-hot rows over a label vocabulary; unknown categories encode to
    the all-zero vector (vector length equals the vocabulary size)."""

    labels: LabelEncoder = field(default_factory=LabelEncoder)

    def fit(self, categories, canonical=None) -> "OneHotEncoder":
        self.labels.fit(categories, canonical=canonical)
        return self

    def transform(self, categories) -> np.ndarray:
        codes = self.labels.transform(categories)
        width = len(self.labels.vocabulary_)
        out = np.zeros((len(codes), width))
        known = codes < width
        out[np.nonzero(known)[0], codes[known]] = 1.0
        return out


# ---------------------------------------------------------------------------
# decomposition channels


def attach_decomposition(
    frame: TimeSeriesFrame,
    result: DecompositionResult,
    mode: str = "full_series",
    train_len: int | None = None,
    decompose=None,
) -> TimeSeriesFrame:
    """Append decomposition channels (imf_1..imf_n, residue) of the pm25
    column as continuous features.

    ``full_series`` takes the given decomposition of the whole series;
    values at time t then depend on the entire series, including the
    future.  ``train_only_refit`` avoids that: the given decomposition
    must cover the first ``train_len`` rows, and the channels for every
    later row t are taken from a fresh decomposition of rows [0, t]
    (expanding window, so row t never sees rows after t).  Extra modes
    from longer windows are folded into the residue; missing ones are
    zero.  ``decompose`` is the callable used for the refits (defaults to
    plain EMD for tractability).
    """
    n = frame.n_rows
    matrix = result.as_matrix()
    width = matrix.shape[1]
    if mode == "full_series":
        if matrix.shape[0] != n:
            raise PipelineError(
                f"decomposition length {matrix.shape[0]} != frame length {n}"
            )
        channels = matrix
    elif mode == "train_only_refit":
        if train_len is None:
            raise PipelineError("train_only_refit requires train_len")
        if matrix.shape[0] != train_len:
            raise PipelineError(
                f"decomposition length {matrix.shape[0]} != train length {train_len}"
            )
        if decompose is None:
            decompose = emd
        channels = np.zeros((n, width))
        channels[:train_len] = matrix
        series = frame.column("pm25")
        for t in range(train_len, n):
            part = decompose(series[: t + 1]).as_matrix()[-1]
            channels[t] = _align_modes(part, width)
    else:
        raise PipelineError(f"unknown attachment mode {mode!r}")

    out = frame.copy()
    names = [f"imf_{j + 1}" for j in range(width - 1)] + ["residue"]
    out.continuous = np.hstack([out.continuous, channels])
    out.continuous_names = out.continuous_names + names
    return out


def _align_modes(row: np.ndarray, width: int) -> np.ndarray:
    """Fit a (modes..., residue) row into ``width`` slots, highest
    frequency first: extra slow modes merge into the residue, absent ones
    are zero."""
    out = np.zeros(width)
    n_modes = row.size - 1
    keep = min(n_modes, width - 1)
    out[:keep] = row[:keep]
    out[width - 1] = row[keep:].sum()
    return out


# ---------------------------------------------------------------------------
# supervised windows and splits


@dataclass
class SupervisedDataset:
    """Windowed samples: per-timestep numeric and categorical history
    blocks plus the target ``horizon`` steps past the window end."""

    x_num: np.ndarray  # [N, T, C_num], standardized
    x_cat: np.ndarray  # [N, T, C_cat], integer codes
    y: np.ndarray  # [N], raw-scale targets
    target_times: list[datetime]
    horizon: int
    numeric_names: list[str]
    categorical_names: list[str]
    cat_cardinalities: list[int]
    target_mean: float
    target_std: float

    def __len__(self) -> int:
        return self.x_num.shape[0]

    @property
    def history(self) -> int:
        return self.x_num.shape[1]

    def subset(self, indices) -> "SupervisedDataset":
        return replace(
            self,
            x_num=self.x_num[indices],
            x_cat=self.x_cat[indices],
            y=self.y[indices],
            target_times=[self.target_times[i] for i in np.atleast_1d(indices)],
        )

    def slice_range(self, start: int, stop: int) -> "SupervisedDataset":
        return replace(
            self,
            x_num=self.x_num[start:stop],
            x_cat=self.x_cat[start:stop],
            y=self.y[start:stop],
            target_times=self.target_times[start:stop],
        )


def make_windows(
    frame: TimeSeriesFrame,
    history: int,
    horizon: int,
    numeric: np.ndarray,
    weather_codes: np.ndarray,
    weather_cardinality: int,
    target_mean: float,
    target_std: float,
) -> SupervisedDataset:
    """Build sliding windows: sample i covers rows [i, i+history) and its
    target is the raw pm25 at row i + history + horizon - 1."""
    n = frame.n_rows
    if horizon < 1:
        raise PipelineError(f"horizon must be >= 1, got {horizon}")
    n_samples = n - history - horizon + 1
    if n_samples < 1:
        raise PipelineError(
            f"frame of {n} rows is too short for history={history}, horizon={horizon}"
        )
    cats = np.stack(
        [
            weather_codes,
            frame.month_codes(),
            frame.day_of_week_codes(),
            frame.hour_codes(),
        ],
        axis=1,
    )
    starts = np.arange(n_samples)
    window_idx = starts[:, None] + np.arange(history)[None, :]
    target_idx = starts + history + horizon - 1
    raw_target = frame.column("pm25")
    cards = [weather_cardinality] + [
        CATEGORICAL_CARDINALITIES[name] for name in CATEGORICAL_COLUMNS[1:]
    ]
    return SupervisedDataset(
        x_num=numeric[window_idx],
        x_cat=cats[window_idx],
        y=raw_target[target_idx],
        target_times=[frame.timestamps[i] for i in target_idx],
        horizon=horizon,
        numeric_names=list(frame.continuous_names),
        categorical_names=list(CATEGORICAL_COLUMNS),
        cat_cardinalities=cards,
        target_mean=target_mean,
        target_std=target_std,
    )


def split_sizes(n: int, fractions=(0.6, 0.2, 0.2)) -> tuple[int, int, int]:
    """Chronological split sizes: floors for validation and test, the
    remainder (including rounding slack) goes to train."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise PipelineError(f"fractions {fractions} must sum to 1")
    n_val = int(n * fractions[1])
    n_test = int(n * fractions[2])
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) <= 0:
        raise PipelineError(f"{n} rows cannot be split {fractions}")
    return n_train, n_val, n_test


def split_chronological(dataset: SupervisedDataset, fractions=(0.6, 0.2, 0.2)):
    """Contiguous, ordered train/validation/test split of the samples."""
    n_train, n_val, n_test = split_sizes(len(dataset), fractions)
    train = dataset.slice_range(0, n_train)
    val = dataset.slice_range(n_train, n_train + n_val)
    test = dataset.slice_range(n_train + n_val, n_train + n_val + n_test)
    return train, val, test


def split_rows_by_date(timestamps, train_end: datetime, val_end: datetime):
    """Row index ranges for date-boundary splits: train covers timestamps
    before ``train_end``, validation before ``val_end``, test the rest."""
    ts = list(timestamps)
    n = len(ts)
    n_train = sum(1 for t in ts if t < train_end)
    n_val = sum(1 for t in ts if train_end <= t < val_end)
    if n_train == 0 or n_val == 0 or n_train + n_val >= n:
        raise PipelineError("date boundaries produce an empty split")
    return (0, n_train), (n_train, n_train + n_val), (n_train + n_val, n)


# ---------------------------------------------------------------------------
# end-to-end preparation


def prepare_datasets(
    frame: TimeSeriesFrame,
    history: int = 24,
    horizon: int = 1,
    fractions=(0.6, 0.2, 0.2),
    decompose=None,
    decomposition_result: DecompositionResult | None = None,
    attach_mode: str = "full_series",
):
    """Frame -> (train, validation, test) supervised datasets.

    Missing cells are filled, decomposition channels are optionally
    attached (``decompose`` maps a 1-D series to a DecompositionResult; a
    precomputed full-series ``decomposition_result`` can be passed instead
    to share one decomposition across horizons), the weather vocabulary
    and the per-column scaler are fit on the rows reachable by training
    samples only, and the windows are split chronologically by sample
    counts.

    Returns the three datasets plus an artifacts dict (scaler, weather
    encoder, attached frame, decomposition metadata).
    """
    frame = interpolate_missing(frame)
    n_rows = frame.n_rows
    n_samples = n_rows - history - horizon + 1
    if n_samples < 3:
        raise PipelineError("frame too short to window and split")
    s_train, _, _ = split_sizes(n_samples, fractions)
    train_row_end = s_train + history + horizon - 1  # last row any train sample touches

    artifacts = {}
    if decompose is not None or decomposition_result is not None:
        if attach_mode == "full_series":
            result = decomposition_result
            if result is None:
                result = decompose(frame.column("pm25"))
        elif attach_mode == "train_only_refit":
            if decompose is None:
                raise PipelineError("train_only_refit requires a decompose callable")
            result = decompose(frame.column("pm25")[:train_row_end])
        else:
            raise PipelineError(f"unknown attachment mode {attach_mode!r}")
        frame = attach_decomposition(
            frame, result, mode=attach_mode, train_len=train_row_end, decompose=decompose
        )
        artifacts["decomposition_meta"] = dict(result.meta)
        artifacts["n_imfs"] = result.n_imfs

    encoder = LabelEncoder().fit(frame.weather[:train_row_end], canonical=WEATHER_CATEGORIES)
    weather_codes = encoder.transform(frame.weather)

    scaler = StandardScaler().fit(frame.continuous[:train_row_end])
    numeric = scaler.transform(frame.continuous)
    pm_idx = frame.continuous_names.index("pm25")
    dataset = make_windows(
        frame,
        history,
        horizon,
        numeric,
        weather_codes,
        encoder.n_codes,
        target_mean=float(scaler.mean_[pm_idx]),
        target_std=float(scaler.std_[pm_idx]) or 1.0,
    )
    train, val, test = split_chronological(dataset, fractions)
    artifacts.update({"scaler": scaler, "weather_encoder": encoder, "frame": frame})
    return train, val, test, artifacts
