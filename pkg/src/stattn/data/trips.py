"""Trip CSV parsing, the common-station registry and hourly traffic counts."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from ..errors import DataError
from .geo import haversine_m

log = logging.getLogger(__name__)

N_POI_CATEGORIES = 13

# NYC bounding box for sanity-checking coordinates
LAT_RANGE = (40.4, 41.1)
LON_RANGE = (-74.3, -73.6)

TRIP_COLUMNS = {
    "starttime": "start_time",
    "stoptime": "stop_time",
    "start station id": "start_id",
    "end station id": "end_id",
    "start station latitude": "start_lat",
    "start station longitude": "start_lon",
    "end station latitude": "end_lat",
    "end station longitude": "end_lon",
}


@dataclass
class TripFile:
    """Valid trips from one monthly export plus what was dropped while parsing."""

    path: str
    trips: pd.DataFrame
    rows: int
    skipped: int

    @property
    def station_ids(self) -> set[int]:
        return set(self.trips["start_id"]).union(self.trips["end_id"])

    def hour_span(self) -> tuple[int, int]:
        """First and last start hour (inclusive), as hours since the epoch."""
        hours = floor_hours(self.trips["start_time"])
        return int(hours.min()), int(hours.max())


def floor_hours(times: pd.Series) -> np.ndarray:
    return times.to_numpy(dtype="datetime64[ns]").astype("datetime64[h]").astype(np.int64)


def read_trip_file(path: str | Path) -> TripFile:
    """Parse a Citi Bike style monthly CSV.

    Rows with unparseable timestamps or ids, a stop before the start, or
    coordinates outside the NYC box are skipped and counted. More than 1%
    skipped logs a warning.
    """
    path = str(path)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError) as exc:
        raise DataError(f"{path}: cannot read trip file: {exc}") from exc
    raw.columns = [c.strip().lower() for c in raw.columns]
    missing = [c for c in TRIP_COLUMNS if c not in raw.columns]
    if missing:
        raise DataError(f"{path}: missing trip columns {missing}")
    df = raw[list(TRIP_COLUMNS)].rename(columns=TRIP_COLUMNS)
    for col in ("start_time", "stop_time"):
        df[col] = pd.to_datetime(df[col].str.strip(), format="ISO8601", errors="coerce")
    for col in ("start_id", "end_id", "start_lat", "start_lon", "end_lat", "end_lon"):
        df[col] = pd.to_numeric(df[col].str.strip(), errors="coerce")

    ok = df.notna().all(axis=1)
    ok &= (df["start_id"] % 1 == 0) & (df["end_id"] % 1 == 0)
    ok &= df["stop_time"] >= df["start_time"]
    for lat, lon in (("start_lat", "start_lon"), ("end_lat", "end_lon")):
        ok &= df[lat].between(*LAT_RANGE) & df[lon].between(*LON_RANGE)
    trips = df[ok].reset_index(drop=True)
    trips["start_id"] = trips["start_id"].astype(np.int64)
    trips["end_id"] = trips["end_id"].astype(np.int64)
    skipped = int((~ok).sum())
    if len(df) and skipped / len(df) > 0.01:
        log.warning("%s: skipped %d of %d rows (%.1f%%)", path, skipped, len(df), 100.0 * skipped / len(df))
    if trips.empty:
        raise DataError(f"{path}: no valid trips")
    return TripFile(path, trips, len(df), skipped)


@dataclass
class StationRegistry:
    """Stations in axis order. Position ``i`` is station ``ids[i]`` everywhere."""

    ids: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    poi: np.ndarray = field(default=None)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.lat = np.asarray(self.lat, dtype=np.float64)
        self.lon = np.asarray(self.lon, dtype=np.float64)
        if self.poi is None:
            self.poi = np.zeros((len(self.ids), N_POI_CATEGORIES), dtype=np.int64)
        self.poi = np.asarray(self.poi, dtype=np.int64)
        if len(np.unique(self.ids)) != len(self.ids):
            raise DataError("station ids in registry are not unique")
        if self.poi.shape != (len(self.ids), N_POI_CATEGORIES) or np.any(self.poi < 0):
            raise DataError(f"poi counts must be a non-negative ({len(self.ids)}, {N_POI_CATEGORIES}) array")

    def __len__(self) -> int:
        return len(self.ids)

    def position(self) -> dict[int, int]:
        return {int(s): i for i, s in enumerate(self.ids)}

    def subset(self, positions: Sequence[int]) -> StationRegistry:
        positions = np.asarray(positions, dtype=np.int64)
        return StationRegistry(self.ids[positions], self.lat[positions], self.lon[positions], self.poi[positions])

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {
            "registry.id": self.ids.astype(np.float64),
            "registry.lat": self.lat,
            "registry.lon": self.lon,
            "registry.poi": self.poi.astype(np.float64),
        }

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> StationRegistry:
        return cls(
            arrays["registry.id"].astype(np.int64),
            arrays["registry.lat"],
            arrays["registry.lon"],
            arrays["registry.poi"].astype(np.int64),
        )


def _first_coordinates(files: Sequence[TripFile]) -> pd.DataFrame:
    frames = []
    offset = 0
    for tf in files:
        t = tf.trips
        order = offset + 2 * np.arange(len(t))
        frames.append(pd.DataFrame({"id": t["start_id"], "lat": t["start_lat"], "lon": t["start_lon"], "order": order}))
        frames.append(pd.DataFrame({"id": t["end_id"], "lat": t["end_lat"], "lon": t["end_lon"], "order": order + 1}))
        offset += 2 * len(t)
    return pd.concat(frames, ignore_index=True).sort_values("order", kind="stable")


def build_registry(files: Sequence[TripFile], report: dict | None = None) -> StationRegistry:
    """Stations present in every file, ordered by ascending id.

    Coordinates come from the first occurrence across the files (in the given
    order); stations whose other recorded positions lie more than 10 m away
    are listed under ``coordinate_conflicts`` in ``report``.
    """
    if not files:
        raise DataError("build_registry needs at least one trip file")
    common = set.intersection(*(tf.station_ids for tf in files))
    if not common:
        counts = ", ".join(f"{tf.path}: {len(tf.station_ids)}" for tf in files)
        raise DataError(f"no station appears in every trip file (stations per file: {counts})")
    ids = np.array(sorted(common), dtype=np.int64)
    coords = _first_coordinates(files)
    coords = coords[coords["id"].isin(common)]
    first = coords.drop_duplicates("id", keep="first").set_index("id").loc[ids]

    distinct = coords.drop_duplicates(["id", "lat", "lon"])
    ref = first.loc[distinct["id"]]
    dist = haversine_m(ref["lat"].to_numpy(), ref["lon"].to_numpy(), distinct["lat"].to_numpy(), distinct["lon"].to_numpy())
    conflicts = sorted({int(i) for i in distinct["id"].to_numpy()[dist > 10.0]})
    if conflicts:
        log.warning("%d stations have positions more than 10 m apart across records", len(conflicts))
    if report is not None:
        report["coordinate_conflicts"] = conflicts
    return StationRegistry(ids, first["lat"].to_numpy(), first["lon"].to_numpy())


def bucket_traffic(
    trips: pd.DataFrame,
    registry: StationRegistry,
    kind: str,
    hours: np.ndarray,
    report: Counter | None = None,
) -> np.ndarray:
    """Hourly counts, ``(len(hours), N)``.

    Pick-ups are counted at the start station in the hour of the start time,
    drop-offs at the end station in the hour of the stop time. Trips at
    stations outside the registry, or landing outside ``hours`` (a contiguous
    run of epoch hours), are dropped and tallied in ``report``.
    """
    if kind == "pickup":
        station, times = trips["start_id"].to_numpy(), trips["start_time"]
    elif kind == "dropoff":
        station, times = trips["end_id"].to_numpy(), trips["stop_time"]
    else:
        raise ValueError(f"unknown traffic kind {kind!r}")
    hours = np.asarray(hours, dtype=np.int64)
    if len(hours) and np.any(np.diff(hours) != 1):
        raise DataError("hour axis must be contiguous")
    counts = np.zeros((len(hours), len(registry)), dtype=np.int64)
    if not len(trips):
        return counts
    row = floor_hours(times) - (hours[0] if len(hours) else 0)
    col = np.searchsorted(registry.ids, station)
    col_clipped = np.minimum(col, len(registry) - 1)
    known = registry.ids[col_clipped] == station
    in_span = (row >= 0) & (row < len(hours))
    keep = known & in_span
    np.add.at(counts, (row[keep], col_clipped[keep]), 1)
    if report is not None:
        report[f"{kind}_unknown_station"] += int((~known).sum())
        report[f"{kind}_outside_span"] += int((known & ~in_span).sum())
    return counts
