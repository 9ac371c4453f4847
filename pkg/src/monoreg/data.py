"""Time-series ingestion, trimming, and standardization.

Raw logger files are CSVs of (timestamp, pressure drop) pairs recorded every
few tens of seconds.  The model is fit on time rescaled to [0, 1] and on the
outcome standardized to mean zero, variance one; the inverse transforms are
recorded so every posterior summary can be mapped back to physical units.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_TRIM_START = 30.0  # minutes discarded at the start (filter stretch-in)
DEFAULT_TRIM_END = 5.0  # minutes discarded at the end (shutdown noise)


@dataclass(frozen=True)
class ScalingInfo:
    """Inverse-transform metadata recorded at standardization time.

    x_min / x_max are in minutes on the (possibly trimmed) series;
    trim_start / trim_end are the durations that were removed.
    """

    y_mean: float
    y_sd: float
    x_min: float
    x_max: float
    trim_start: float = 0.0
    trim_end: float = 0.0

    def __post_init__(self):
        if not self.y_sd > 0:
            raise ValueError("y_sd must be positive")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def duration(self) -> float:
        """Span of the scaled axis in original time units (minutes)."""
        return self.x_max - self.x_min

    def to_time(self, x) -> np.ndarray:
        """Map unit-interval coordinates back to minutes."""
        return self.x_min + np.asarray(x, dtype=float) * (self.x_max - self.x_min)

    def to_value(self, y) -> np.ndarray:
        """Map standardized outcome values back to original units."""
        return self.y_mean + self.y_sd * np.asarray(y, dtype=float)


@dataclass(frozen=True)
class RawSeries:
    """Ordered (time, value) pairs in minutes, before standardization."""

    times: np.ndarray
    values: np.ndarray
    n_dropped: int = 0
    trim_start: float = 0.0
    trim_end: float = 0.0

    def __post_init__(self):
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have equal length")


@dataclass(frozen=True)
class Dataset:
    """Model-ready data: x in [0, 1], y standardized, transforms recorded."""

    x: np.ndarray
    y: np.ndarray
    scaling: ScalingInfo
    filter_mass: float | None = None
    flow_rate: float | None = None

    def __post_init__(self):
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be equal-length vectors")
        if self.x.size and (self.x[0] < 0.0 or self.x[-1] > 1.0):
            raise ValueError("x must lie in [0, 1]")
        if np.any(np.diff(self.x) < 0):
            raise ValueError("x must be nondecreasing")
        if abs(float(np.mean(self.y))) >= 1e-10:
            raise ValueError("y must be standardized to mean zero")
        if abs(float(np.std(self.y, ddof=1)) - 1.0) >= 1e-10:
            raise ValueError("y must be standardized to unit variance")

    @property
    def n(self) -> int:
        return self.x.size


def _parse_time(text: str) -> tuple[float, bool] | None:
    """Parse a timestamp cell to minutes, or None if unparseable.

    Numeric cells are taken as minutes verbatim; otherwise ISO-8601 is
    accepted (flagged so the series can be rebased to start at zero, which
    keeps the output axis in plain minutes and independent of time zone).
    """
    text = text.strip()
    if not text:
        return None
    try:
        return float(text), False
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        return None
    return stamp.timestamp() / 60.0, True


def load_timeseries(
    path,
    time_column: str = "time",
    value_column: str = "pressure_drop",
) -> RawSeries:
    """Read an ordered (time, value) series from a headered CSV file.

    Rows with missing or unparseable cells are dropped and counted.
    Timestamps must be nondecreasing; duplicated timestamps have their values
    averaged.  Strictly decreasing timestamps are an error.
    """
    path = Path(path)
    if not path.exists():
        raise OSError(f"input file not found: {path}")
    times: list[float] = []
    values: list[float] = []
    rows_dropped = 0
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, expected a CSV header row")
        missing = [c for c in (time_column, value_column) if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing column(s) {missing}; found {reader.fieldnames}")
        iso_seen = numeric_seen = False
        for row in reader:
            parsed = _parse_time(row[time_column] or "")
            raw_value = (row[value_column] or "").strip()
            try:
                v = float(raw_value) if raw_value else None
            except ValueError:
                v = None
            if parsed is None or v is None or not (
                math.isfinite(parsed[0]) and math.isfinite(v)
            ):
                rows_dropped += 1
                continue
            t, is_iso = parsed
            iso_seen |= is_iso
            numeric_seen |= not is_iso
            times.append(t)
            values.append(v)
    if not times:
        raise ValueError(f"{path}: no valid data rows")
    if iso_seen and numeric_seen:
        raise ValueError(f"{path}: mixed numeric and ISO-8601 timestamps")
    t_arr = np.asarray(times)
    if iso_seen:
        t_arr = t_arr - t_arr[0]
    v_arr = np.asarray(values)

    decreasing = np.nonzero(np.diff(t_arr) < 0)[0]
    if decreasing.size:
        # +2: report 1-based data-row numbers of the out-of-order entries
        rows = ", ".join(str(i + 2) for i in decreasing[:10])
        raise ValueError(f"{path}: timestamps decrease at data row(s) {rows}")

    uniq, inverse, counts = np.unique(t_arr, return_inverse=True, return_counts=True)
    if uniq.size != t_arr.size:
        averaged = np.zeros_like(uniq)
        np.add.at(averaged, inverse, v_arr)
        averaged /= counts
        logger.info(
            "%s: averaged %d duplicate timestamp(s)", path, t_arr.size - uniq.size
        )
        t_arr, v_arr = uniq, averaged

    if rows_dropped:
        logger.info("%s: dropped %d row(s) with missing values", path, rows_dropped)
    return RawSeries(times=t_arr, values=v_arr, n_dropped=rows_dropped)


def trim_series(
    series: RawSeries,
    trim_start: float = DEFAULT_TRIM_START,
    trim_end: float = DEFAULT_TRIM_END,
) -> RawSeries:
    """Drop the warm-up head and shutdown tail of a series.

    Keeps observations with t0 + trim_start < t <= t_end - trim_end.  Both
    durations are minutes.
    """
    if trim_start < 0 or trim_end < 0:
        raise ValueError("trim durations must be nonnegative")
    duration = series.times[-1] - series.times[0]
    if duration <= trim_start + trim_end:
        raise ValueError(
            f"series spans {duration:g} min, too short to trim "
            f"{trim_start:g} + {trim_end:g} min"
        )
    lo = series.times[0] + trim_start
    hi = series.times[-1] - trim_end
    keep = (series.times > lo) & (series.times <= hi)
    if trim_start == 0.0:
        keep |= series.times == series.times[0]
    return RawSeries(
        times=series.times[keep],
        values=series.values[keep],
        n_dropped=series.n_dropped,
        trim_start=series.trim_start + trim_start,
        trim_end=series.trim_end + trim_end,
    )


def standardize(
    series: RawSeries,
    filter_mass: float | None = None,
    flow_rate: float | None = None,
) -> Dataset:
    """Rescale time to [0, 1] and the outcome to mean zero, unit variance."""
    if series.times.size < 3:
        raise ValueError("need at least 3 observations to standardize")
    t = series.times
    v = series.values
    y_mean = float(np.mean(v))
    y_sd = float(np.std(v, ddof=1))
    if y_sd == 0.0 or not math.isfinite(y_sd):
        raise ValueError("degenerate series: outcome has zero variance")
    scaling = ScalingInfo(
        y_mean=y_mean,
        y_sd=y_sd,
        x_min=float(t[0]),
        x_max=float(t[-1]),
        trim_start=series.trim_start,
        trim_end=series.trim_end,
    )
    x = (t - scaling.x_min) / (scaling.x_max - scaling.x_min)
    y = (v - y_mean) / y_sd
    return Dataset(
        x=x, y=y, scaling=scaling, filter_mass=filter_mass, flow_rate=flow_rate
    )


def destandardize(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Recover the original (times, values) pairs from a Dataset."""
    return dataset.scaling.to_time(dataset.x), dataset.scaling.to_value(dataset.y)


def read_metadata(path) -> dict:
    """Parse a sidecar key-value metadata file.

    Lines look like ``filter_mass_ug = 481.5`` or ``sample_id: run07``; blank
    lines and ``#`` comments are ignored.  Numeric values are converted.
    """
    path = Path(path)
    if not path.exists():
        raise OSError(f"metadata file not found: {path}")
    meta: dict = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, _, value = line.partition(sep)
                break
        else:
            raise ValueError(f"{path}: cannot parse metadata line {line!r}")
        key = key.strip()
        value = value.strip()
        try:
            meta[key] = float(value)
        except ValueError:
            meta[key] = value
    return meta
