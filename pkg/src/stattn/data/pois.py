"""Points of interest near each station, by major category."""

from __future__ import annotations

import io
from collections import Counter
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import DataError
from .geo import haversine_m
from .trips import N_POI_CATEGORIES, StationRegistry

DEFAULT_COLUMNS = {"latitude": "latitude", "longitude": "longitude", "category": "category"}
DEFAULT_RADIUS_M = 150.0
_CHUNK = 256


def load_category_map(path: str | Path | None = None) -> dict[str, int]:
    """Map category codes and names (case-insensitive) to slots 0..12."""
    if path is None:
        text = resources.files("stattn.data").joinpath("poi_categories.csv").read_text()
        table = pd.read_csv(io.StringIO(text), dtype=str)
    else:
        table = pd.read_csv(path, dtype=str)
    mapping: dict[str, int] = {}
    for code, slot, name in table[["code", "slot", "name"]].itertuples(index=False):
        slot = int(slot)
        if not 0 <= slot < N_POI_CATEGORIES:
            raise DataError(f"category slot {slot} outside 0..{N_POI_CATEGORIES - 1}")
        mapping[code.strip().lower()] = slot
        mapping[name.strip().lower()] = slot
    return mapping


def read_pois(
    path: str | Path,
    category_map: dict[str, int] | None = None,
    columns: dict[str, str] | None = None,
) -> pd.DataFrame:
    """Frame with ``lat``, ``lon`` and ``slot`` (-1 for unmapped categories).

    Rows without usable coordinates are dropped.
    """
    cols = {**DEFAULT_COLUMNS, **(columns or {})}
    category_map = load_category_map() if category_map is None else category_map
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError) as exc:
        raise DataError(f"{path}: cannot read POI file: {exc}") from exc
    missing = [c for c in cols.values() if c not in raw.columns]
    if missing:
        raise DataError(f"{path}: missing POI columns {missing}")
    df = pd.DataFrame({
        "lat": pd.to_numeric(raw[cols["latitude"]].str.strip(), errors="coerce"),
        "lon": pd.to_numeric(raw[cols["longitude"]].str.strip(), errors="coerce"),
        "slot": [category_map.get(c.strip().lower(), -1) for c in raw[cols["category"]]],
    })
    return df.dropna(subset=["lat", "lon"]).reset_index(drop=True)


def count_pois(
    registry: StationRegistry,
    pois: pd.DataFrame,
    radius_m: float = DEFAULT_RADIUS_M,
    report: Counter | None = None,
) -> np.ndarray:
    """``(N, 13)`` counts of POIs strictly closer than ``radius_m`` to each station.

    POIs with an unmapped category never enter the counts; how many of them
    fell inside some station's radius is tallied as ``poi_other`` in ``report``.
    """
    counts = np.zeros((len(registry), N_POI_CATEGORIES), dtype=np.int64)
    lat = pois["lat"].to_numpy()
    lon = pois["lon"].to_numpy()
    slot = pois["slot"].to_numpy()
    other = 0
    for start in range(0, len(registry), _CHUNK):
        sl = slice(start, start + _CHUNK)
        dist = haversine_m(registry.lat[sl, None], registry.lon[sl, None], lat[None, :], lon[None, :])
        near = dist < radius_m
        for s in range(N_POI_CATEGORIES):
            counts[sl, s] = near[:, slot == s].sum(axis=1)
        other += int(near[:, slot < 0].sum())
    if report is not None:
        report["poi_other"] += other
        report["poi_unmapped_rows"] += int((slot < 0).sum())
    return counts
