"""Deterministic synthetic datasets for smoke runs and property tests.

Both generators return a :class:`~stattn.data.Dataset` laid out like a real
ingest: one segment per month, June-August for training and October for
testing, 19 features per station.
"""

from __future__ import annotations

import numpy as np

from .data.dataset import Dataset
from .data.features import scale_features
from .data.trips import N_POI_CATEGORIES, StationRegistry

TRAIN_MONTHS = (6, 7, 8)
TEST_MONTHS = (10,)
_MONTH_START = {6: "2019-06-01", 7: "2019-07-01", 8: "2019-08-01", 10: "2019-10-01"}


def _hour_axis(days_per_month: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    hours, segment, months = [], [], []
    for seg, month in enumerate(TRAIN_MONTHS + TEST_MONTHS):
        start = np.datetime64(_MONTH_START[month], "h").astype(np.int64)
        hours.append(start + np.arange(24 * days_per_month))
        segment.append(np.full(24 * days_per_month, seg))
        months.append(201900 + month)
    return np.concatenate(hours), np.concatenate(segment), np.array(months)


def _registry(n: int, rng: np.random.Generator) -> StationRegistry:
    lat = 40.70 + 0.08 * rng.random(n)
    lon = -74.02 + 0.06 * rng.random(n)
    poi = rng.integers(0, 6, (n, N_POI_CATEGORIES))
    return StationRegistry(np.arange(100, 100 + n), lat, lon, poi)


def _weather(hours: np.ndarray, rng: np.random.Generator, rain_rate: float = 0.03) -> np.ndarray:
    h = hours.astype(np.float64)
    temperature = 72.0 + 8.0 * np.sin(2 * np.pi * (h - 9) / 24.0)
    # rain arrives in multi-hour spells
    rain = np.zeros(len(h))
    i = 0
    while i < len(h):
        if rng.random() < rain_rate:
            span = int(rng.integers(2, 7))
            rain[i : i + span] = rng.uniform(0.05, 0.5)
            i += span
        else:
            i += 1
    wind = 8.0 + 3.0 * np.sin(2 * np.pi * h / 37.0)
    return np.column_stack([temperature, rain, wind])


def _assemble(registry, hours, segment, months, pickup, dropoff, weather_raw) -> Dataset:
    ds = Dataset(
        registry=registry, hours=hours, segment=segment, segment_month=months,
        pickup=pickup, dropoff=dropoff, weather_raw=weather_raw,
        weather_scaled=np.zeros_like(weather_raw), static=np.zeros((len(registry), 15)),
        ranges={}, train_months=TRAIN_MONTHS, test_months=TEST_MONTHS,
    )
    ds.weather_scaled, ds.static, ds.ranges = scale_features(registry, weather_raw, ds.train_hours())
    return ds


def sinusoid_dataset(
    n_stations: int = 5, days_per_month: int = 3, rain_rate: float = 0.1, seed: int = 0
) -> Dataset:
    """Daily sinusoids with a per-station phase, depressed by rain.

    ``traffic = 6 + 4 sin(2 pi hour / 24 + phase) - 6 * rain(hour - 1)``
    floored at 0; drop-offs lag pick-ups by one hour. Rain acts with a one
    hour delay so every target is a function of its input window.
    """
    rng = np.random.default_rng(seed)
    hours, segment, months = _hour_axis(days_per_month)
    registry = _registry(n_stations, rng)
    weather_raw = _weather(hours, rng, rain_rate)
    phase = 2 * np.pi * np.arange(n_stations) / n_stations
    h = hours.astype(np.float64)[:, None]
    rain = np.concatenate([[0.0], weather_raw[:-1, 1]])[:, None]
    pickup = np.maximum(6.0 + 4.0 * np.sin(2 * np.pi * h / 24.0 + phase) - 6.0 * rain, 0.0)
    dropoff = np.roll(pickup, 1, axis=0)
    return _assemble(registry, hours, segment, months, pickup, dropoff, weather_raw)


def planted_dataset(
    n_stations: int = 5,
    n_relevant: int = 2,
    days_per_month: int = 4,
    lag: int = 3,
    noise: float = 1.0,
    seed: int = 0,
) -> Dataset:
    """Only the first ``n_relevant`` stations carry predictive signal.

    Relevant stations follow smooth random drivers (daily cycle plus an AR(1)
    component). Every other station's traffic is an average of the relevant
    stations ``lag`` hours earlier plus independent noise, so its own history
    adds nothing beyond what the relevant stations' features already hold.
    """
    rng = np.random.default_rng(seed)
    hours, segment, months = _hour_axis(days_per_month)
    registry = _registry(n_stations, rng)
    weather_raw = _weather(hours, rng)
    n_hours = len(hours)
    h = hours.astype(np.float64)
    drivers = np.empty((n_hours, n_relevant))
    for j in range(n_relevant):
        ar = np.zeros(n_hours)
        shocks = rng.normal(0.0, 0.6, n_hours)
        for t in range(1, n_hours):
            ar[t] = 0.9 * ar[t - 1] + shocks[t]
        drivers[:, j] = 6.0 + 3.0 * np.sin(2 * np.pi * h / 24.0 + 2.0 * j) + ar
    traffic = np.empty((n_hours, n_stations))
    traffic[:, :n_relevant] = drivers
    lagged = np.roll(drivers.mean(axis=1), lag)
    lagged[:lag] = drivers[:lag].mean(axis=1)
    for i in range(n_relevant, n_stations):
        traffic[:, i] = lagged + rng.normal(0.0, noise, n_hours)
    traffic = np.maximum(traffic, 0.0)
    return _assemble(registry, hours, segment, months, traffic, np.roll(traffic, 1, axis=0), weather_raw)
