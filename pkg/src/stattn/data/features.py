"""Min-max scaling, per-station feature frames and sliding windows.

Per station and hour the 19 features are, in order::

    0      traffic (pick-ups or drop-offs, raw count)
    1-3    temperature, precipitation (scaled to [0, 10]), wind speed
    4-16   POI counts for the 13 categories
    17-18  longitude, latitude (each scaled to [0, 100])
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .trips import N_POI_CATEGORIES, StationRegistry

log = logging.getLogger(__name__)

N_FEATURES = 1 + 3 + N_POI_CATEGORIES + 2
PRECIP_SPAN = 10.0
COORD_SPAN = 100.0


def minmax_scale(values, lo: float, hi: float, span: float, label: str = "feature") -> np.ndarray:
    """``span * (x - lo) / (hi - lo)``; a constant feature (hi == lo) maps to 0."""
    values = np.asarray(values, dtype=np.float64)
    if hi == lo:
        log.warning("%s is constant over the fitting range; scaled to 0", label)
        return np.zeros_like(values)
    return span * (values - lo) / (hi - lo)


def scale_features(
    registry: StationRegistry,
    weather: np.ndarray,
    train_mask: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, dict[str, tuple[float, float]]]:
    """Scale precipitation and coordinates.

    Args:
        registry: stations in axis order.
        weather: ``(H, 3)`` raw hourly temperature, precipitation, wind speed.
        train_mask: ``(H,)`` bool; only these hours set the precipitation range.

    Returns:
        ``(weather_scaled (H, 3), static (N, 15), ranges)``. ``static`` holds
        the 13 POI counts then scaled longitude and latitude; ``ranges`` maps
        ``precipitation``/``longitude``/``latitude`` to the frozen (min, max).
    """
    weather = np.asarray(weather, dtype=np.float64)
    train_mask = np.asarray(train_mask, dtype=bool)
    if not train_mask.any():
        raise ValueError("no training hours to fit scaling ranges on")
    precip = weather[train_mask, 1]
    ranges = {
        "precipitation": (float(precip.min()), float(precip.max())),
        "longitude": (float(registry.lon.min()), float(registry.lon.max())),
        "latitude": (float(registry.lat.min()), float(registry.lat.max())),
    }
    scaled = weather.copy()
    scaled[:, 1] = minmax_scale(weather[:, 1], *ranges["precipitation"], PRECIP_SPAN, "precipitation")
    static = np.column_stack([
        registry.poi.astype(np.float64),
        minmax_scale(registry.lon, *ranges["longitude"], COORD_SPAN, "longitude"),
        minmax_scale(registry.lat, *ranges["latitude"], COORD_SPAN, "latitude"),
    ])
    return scaled, static, ranges


def frame_features(traffic: np.ndarray, weather: np.ndarray, static: np.ndarray) -> np.ndarray:
    """Feature block for one or more hours.

    ``traffic (..., N)``, ``weather (..., 3)``, ``static (N, 15)`` give
    ``(..., N, 19)``.
    """
    traffic = np.asarray(traffic, dtype=np.float64)
    lead = traffic.shape[:-1]
    n = traffic.shape[-1]
    out = np.empty(lead + (n, N_FEATURES))
    out[..., 0] = traffic
    out[..., 1:4] = np.asarray(weather, dtype=np.float64)[..., None, :]
    out[..., 4:] = static
    return out


def window_starts(segment: np.ndarray, steps: int, horizon: int) -> np.ndarray:
    """Start hours of every window of ``steps + horizon`` hours inside one segment."""
    segment = np.asarray(segment)
    span = steps + horizon
    starts = []
    for seg in np.unique(segment):
        idx = np.flatnonzero(segment == seg)
        if len(idx) < span:
            log.warning("segment %s has %d hours, fewer than the %d a window needs; excluded", seg, len(idx), span)
            continue
        if np.any(np.diff(idx) != 1):
            raise ValueError(f"segment {seg} is not contiguous on the hour axis")
        starts.append(np.arange(idx[0], idx[-1] - span + 2))
    return np.concatenate(starts) if starts else np.zeros(0, dtype=np.int64)


@dataclass
class WindowSet:
    """Windows materialised on demand from the hourly components.

    ``inputs(i)`` is ``(len(i), T, N*19)`` station-major; ``targets(i)`` is
    ``(len(i), tau, N)``.
    """

    traffic: np.ndarray
    weather: np.ndarray
    static: np.ndarray
    starts: np.ndarray
    steps: int
    horizon: int

    def __len__(self) -> int:
        return len(self.starts)

    @property
    def n_stations(self) -> int:
        return self.traffic.shape[1]

    def inputs(self, index=None) -> np.ndarray:
        starts = self.starts if index is None else self.starts[np.asarray(index)]
        rows = starts[:, None] + np.arange(self.steps)[None, :]
        block = frame_features(self.traffic[rows], self.weather[rows], self.static)
        return block.reshape(len(starts), self.steps, -1)

    def targets(self, index=None) -> np.ndarray:
        starts = self.starts if index is None else self.starts[np.asarray(index)]
        rows = starts[:, None] + self.steps + np.arange(self.horizon)[None, :]
        return np.asarray(self.traffic[rows], dtype=np.float64)

    def target_hours(self, hours: np.ndarray, index=None) -> np.ndarray:
        starts = self.starts if index is None else self.starts[np.asarray(index)]
        return hours[starts[:, None] + self.steps + np.arange(self.horizon)[None, :]]


def assemble_windows(
    traffic: np.ndarray,
    weather: np.ndarray,
    static: np.ndarray,
    segment: np.ndarray,
    roles: dict[int, str],
    steps: int = 12,
    horizon: int = 1,
    val_fraction: float = 0.2,
) -> dict[str, WindowSet]:
    """Split windows into ``train``/``val``/``test``.

    ``roles`` maps segment id to ``"train"`` or ``"test"``; other segments are
    ignored. The chronological last ``val_fraction`` of training windows
    becomes the validation split.
    """
    starts = window_starts(segment, steps, horizon)
    role_of = np.array([roles.get(int(segment[s]), "") for s in starts], dtype=object)
    train = starts[role_of == "train"]
    n_val = int(len(train) * val_fraction)
    split = {
        "train": train[: len(train) - n_val],
        "val": train[len(train) - n_val :],
        "test": starts[role_of == "test"],
    }
    return {k: WindowSet(traffic, weather, static, v.astype(np.int64), steps, horizon) for k, v in split.items()}
