"""Hourly weather: parse readings, average within each hour, fill short gaps."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from ..errors import DataError

log = logging.getLogger(__name__)

FIELDS = ("temperature", "precipitation", "wind_speed")
DEFAULT_COLUMNS = {"time": "timestamp", "temperature": "temperature",
                   "precipitation": "precipitation", "wind_speed": "wind_speed"}
MAX_GAP_HOURS = 6


class WeatherHour(NamedTuple):
    hour: int  # hours since the epoch, naive local time
    temperature: float  # degrees F
    precipitation: float  # inches, unscaled
    wind_speed: float  # mph


def read_weather(path: str | Path, columns: dict[str, str] | None = None) -> tuple[pd.DataFrame, int]:
    """Load raw readings as a frame with ``time`` plus :data:`FIELDS`.

    Returns the frame and the number of rows skipped as unparseable or with
    negative precipitation.
    """
    cols = {**DEFAULT_COLUMNS, **(columns or {})}
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError) as exc:
        raise DataError(f"{path}: cannot read weather file: {exc}") from exc
    missing = [c for c in cols.values() if c not in raw.columns]
    if missing:
        raise DataError(f"{path}: missing weather columns {missing}")
    df = pd.DataFrame({"time": pd.to_datetime(raw[cols["time"]].str.strip(), format="ISO8601", errors="coerce")})
    for f in FIELDS:
        df[f] = pd.to_numeric(raw[cols[f]].str.strip(), errors="coerce")
    ok = df.notna().all(axis=1) & (df["precipitation"] >= 0)
    return df[ok].reset_index(drop=True), int((~ok).sum())


def aggregate_weather(
    readings: pd.DataFrame,
    hours: np.ndarray | None = None,
    max_gap: int = MAX_GAP_HOURS,
) -> pd.DataFrame:
    """Average readings per hour and fill missing hours.

    Args:
        readings: frame with a datetime ``time`` column and the weather fields.
        hours: contiguous epoch hours to report on; defaults to the span of
            the readings.
        max_gap: longest run of missing hours that may be filled.

    Returns:
        Frame indexed by epoch hour with one row per requested hour. Interior
        gaps are interpolated linearly; gaps at either edge take the nearest
        reading.

    Raises:
        DataError: if a run of missing hours is longer than ``max_gap`` or
            there are no readings at all.
    """
    if readings.empty:
        raise DataError("no weather readings")
    hour = readings["time"].to_numpy(dtype="datetime64[ns]").astype("datetime64[h]").astype(np.int64)
    means = readings[list(FIELDS)].groupby(hour).mean()
    if hours is None:
        hours = np.arange(means.index.min(), means.index.max() + 1, dtype=np.int64)
    hours = np.asarray(hours, dtype=np.int64)
    frame = means.reindex(hours)
    frame.index.name = "hour"

    missing = frame["temperature"].isna().to_numpy()
    run = longest = 0
    for m in missing:
        run = run + 1 if m else 0
        longest = max(longest, run)
    if longest > max_gap:
        raise DataError(f"weather gap of {longest} hours exceeds the {max_gap}-hour limit")
    if longest:
        log.info("filling %d missing weather hours", int(missing.sum()))
        frame = frame.interpolate(method="index", limit_area="inside").ffill().bfill()
    return frame


def to_weather_hours(frame: pd.DataFrame) -> list[WeatherHour]:
    return [WeatherHour(int(h), *map(float, row)) for h, row in zip(frame.index, frame[list(FIELDS)].to_numpy())]
