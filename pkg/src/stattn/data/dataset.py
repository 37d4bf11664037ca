"""The processed dataset artifact and the ingest pipeline that builds it.

An artifact directory holds:

* ``dataset.stattn``  named arrays in the STATTN1 container (see below)
* ``dataset.sha256``  hex digest of ``dataset.stattn``
* ``skip_report.json`` counts of everything dropped during ingest

Container entries: ``registry.id/lat/lon/poi``, ``hours`` (epoch hours),
``hour.segment``, ``segment.month`` (yyyymm), ``traffic.pickup``,
``traffic.dropoff``, ``weather.raw``, ``weather.scaled``, ``station.static``,
``scale.precipitation/longitude/latitude`` (min, max), ``split.train_months``,
``split.test_months``.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DataError
from ..numeric import container
from . import features, pois, trips, weather

log = logging.getLogger(__name__)

ARTIFACT_FILE = "dataset.stattn"
HASH_FILE = "dataset.sha256"
REPORT_FILE = "skip_report.json"


def _month_of(hour: int) -> int:
    d = np.datetime64(int(hour), "h").astype("datetime64[M]").astype(object)
    return d.year * 100 + d.month


@dataclass
class Dataset:
    registry: trips.StationRegistry
    hours: np.ndarray
    segment: np.ndarray
    segment_month: np.ndarray
    pickup: np.ndarray
    dropoff: np.ndarray
    weather_raw: np.ndarray
    weather_scaled: np.ndarray
    static: np.ndarray
    ranges: dict[str, tuple[float, float]]
    train_months: tuple[int, ...]
    test_months: tuple[int, ...]

    @property
    def n_stations(self) -> int:
        return len(self.registry)

    def traffic(self, kind: str) -> np.ndarray:
        if kind not in ("pickup", "dropoff"):
            raise ValueError(f"unknown traffic kind {kind!r}")
        return self.pickup if kind == "pickup" else self.dropoff

    def segment_roles(self) -> dict[int, str]:
        roles = {}
        for seg, yyyymm in enumerate(self.segment_month):
            month = int(yyyymm) % 100
            if month in self.train_months:
                roles[seg] = "train"
            elif month in self.test_months:
                roles[seg] = "test"
        return roles

    def train_hours(self) -> np.ndarray:
        roles = self.segment_roles()
        return np.array([roles.get(int(s)) == "train" for s in self.segment], dtype=bool)

    def windows(self, target: str, steps: int = 12, horizon: int = 1, val_fraction: float = 0.2):
        return features.assemble_windows(
            self.traffic(target), self.weather_scaled, self.static, self.segment,
            self.segment_roles(), steps, horizon, val_fraction,
        )

    def to_arrays(self) -> dict[str, np.ndarray]:
        out = self.registry.to_arrays()
        out.update({
            "hours": self.hours.astype(np.float64),
            "hour.segment": self.segment.astype(np.float64),
            "segment.month": self.segment_month.astype(np.float64),
            "traffic.pickup": self.pickup.astype(np.float64),
            "traffic.dropoff": self.dropoff.astype(np.float64),
            "weather.raw": self.weather_raw,
            "weather.scaled": self.weather_scaled,
            "station.static": self.static,
        })
        for name in ("precipitation", "longitude", "latitude"):
            out[f"scale.{name}"] = np.array(self.ranges[name], dtype=np.float64)
        out["split.train_months"] = np.array(self.train_months, dtype=np.float64)
        out["split.test_months"] = np.array(self.test_months, dtype=np.float64)
        return out

    @classmethod
    def from_arrays(cls, a: dict[str, np.ndarray]) -> Dataset:
        try:
            return cls(
                registry=trips.StationRegistry.from_arrays(a),
                hours=a["hours"].astype(np.int64),
                segment=a["hour.segment"].astype(np.int64),
                segment_month=a["segment.month"].astype(np.int64),
                pickup=a["traffic.pickup"],
                dropoff=a["traffic.dropoff"],
                weather_raw=a["weather.raw"],
                weather_scaled=a["weather.scaled"],
                static=a["station.static"],
                ranges={n: tuple(map(float, a[f"scale.{n}"])) for n in ("precipitation", "longitude", "latitude")},
                train_months=tuple(int(m) for m in a["split.train_months"]),
                test_months=tuple(int(m) for m in a["split.test_months"]),
            )
        except KeyError as exc:
            raise DataError(f"artifact is missing entry {exc}") from None

    def save(self, out_dir: str | Path, report: dict | None = None) -> str:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        digest = container.save(out_dir / ARTIFACT_FILE, self.to_arrays())
        (out_dir / HASH_FILE).write_text(digest + "\n")
        if report is not None:
            (out_dir / REPORT_FILE).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        return digest

    @classmethod
    def load(cls, data_dir: str | Path) -> Dataset:
        path = Path(data_dir) / ARTIFACT_FILE
        if not path.exists():
            raise DataError(f"no dataset artifact at {path}")
        try:
            return cls.from_arrays(container.load(path))
        except container.ContainerError as exc:
            raise DataError(f"{path}: {exc}") from exc

    def demand_order(self) -> np.ndarray:
        """Station positions by total training-period pick-ups, busiest first (ties by id)."""
        demand = self.pickup[self.train_hours()].sum(axis=0)
        return np.lexsort((self.registry.ids, -demand))

    def subset(self, count: int) -> Dataset:
        """Equal-stride sample of ``count`` stations along the demand ranking.

        Ranked position ``floor(i * N / count)`` is taken for each ``i``; the
        chosen stations keep registry (ascending id) order. Scaling ranges stay
        frozen at their ingest values.
        """
        n = self.n_stations
        if not 1 <= count <= n:
            raise ValueError(f"subset count must lie in 1..{n}, got {count}")
        order = self.demand_order()
        picked = np.sort(order[(np.arange(count) * n) // count])
        return Dataset(
            registry=self.registry.subset(picked),
            hours=self.hours,
            segment=self.segment,
            segment_month=self.segment_month,
            pickup=self.pickup[:, picked],
            dropoff=self.dropoff[:, picked],
            weather_raw=self.weather_raw,
            weather_scaled=self.weather_scaled,
            static=self.static[picked],
            ranges=dict(self.ranges),
            train_months=self.train_months,
            test_months=self.test_months,
        )


def ingest(
    trip_paths: Sequence[str | Path],
    weather_path: str | Path,
    poi_path: str | Path,
    train_months: Sequence[int] = (6, 7, 8),
    test_months: Sequence[int] = (10,),
    radius_m: float = pois.DEFAULT_RADIUS_M,
    weather_columns: dict[str, str] | None = None,
    poi_columns: dict[str, str] | None = None,
    category_map_path: str | Path | None = None,
) -> tuple[Dataset, dict]:
    """Run the whole preprocessing chain; returns the dataset and a skip report.

    Each trip file becomes one segment of the hour axis spanning its first to
    last start hour. Segments are ordered by start and must not overlap.
    """
    if not trip_paths:
        raise DataError("no trip files given")
    report: dict = {"files": {}}
    counter: Counter = Counter()
    files = [trips.read_trip_file(p) for p in sorted(map(str, trip_paths))]
    for tf in files:
        report["files"][tf.path] = {"rows": tf.rows, "skipped_rows": tf.skipped}
    files.sort(key=lambda tf: tf.hour_span()[0])

    registry = trips.build_registry(files, report)
    log.info("registry: %d stations common to %d files", len(registry), len(files))

    hour_blocks, seg_blocks, months, pick_blocks, drop_blocks = [], [], [], [], []
    last_end = None
    for seg, tf in enumerate(files):
        lo, hi = tf.hour_span()
        if last_end is not None and lo <= last_end:
            raise DataError(f"{tf.path}: hours overlap the previous trip file")
        last_end = hi
        hours = np.arange(lo, hi + 1, dtype=np.int64)
        hour_blocks.append(hours)
        seg_blocks.append(np.full(len(hours), seg, dtype=np.int64))
        months.append(_month_of(lo))
        pick_blocks.append(trips.bucket_traffic(tf.trips, registry, "pickup", hours, counter))
        drop_blocks.append(trips.bucket_traffic(tf.trips, registry, "dropoff", hours, counter))
    hours = np.concatenate(hour_blocks)
    segment = np.concatenate(seg_blocks)

    readings, weather_skipped = weather.read_weather(weather_path, weather_columns)
    counter["weather_skipped_rows"] += weather_skipped
    wx_blocks = []
    for block in hour_blocks:
        try:
            wx_blocks.append(weather.aggregate_weather(readings, block)[list(weather.FIELDS)].to_numpy())
        except DataError as exc:
            raise DataError(f"{weather_path}: {exc}") from exc
    weather_raw = np.vstack(wx_blocks)

    poi_frame = pois.read_pois(poi_path, pois.load_category_map(category_map_path), poi_columns)
    registry.poi = pois.count_pois(registry, poi_frame, radius_m, counter)
    zero = int((registry.poi.sum(axis=1) == 0).sum())
    report["stations_without_poi"] = zero

    ds = Dataset(
        registry=registry,
        hours=hours,
        segment=segment,
        segment_month=np.array(months, dtype=np.int64),
        pickup=np.vstack(pick_blocks),
        dropoff=np.vstack(drop_blocks),
        weather_raw=weather_raw,
        weather_scaled=np.zeros_like(weather_raw),
        static=np.zeros((len(registry), features.N_FEATURES - 4)),
        ranges={},
        train_months=tuple(int(m) for m in train_months),
        test_months=tuple(int(m) for m in test_months),
    )
    train_mask = ds.train_hours()
    if not train_mask.any():
        raise DataError(f"no trip file falls in the training months {list(train_months)}")
    ds.weather_scaled, ds.static, ds.ranges = features.scale_features(registry, weather_raw, train_mask)
    report.update({k: int(v) for k, v in sorted(counter.items())})
    report["stations"] = len(registry)
    report["hours"] = int(len(hours))
    return ds, report
