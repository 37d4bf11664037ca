"""Forecast error metrics in raw count units."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class MetricsReport:
    variant: str
    target: str
    rmse: float
    mae: float
    station_ids: list[int] = field(default_factory=list)
    station_rmse: list[float] = field(default_factory=list)
    count: int = 0

    @property
    def n_stations(self) -> int:
        return len(self.station_ids)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["n_stations"] = self.n_stations
        return out


def compute_metrics(
    actual,
    predicted,
    station_index=None,
    station_ids=None,
    variant: str = "",
    target: str = "",
) -> MetricsReport:
    """RMSE and MAE over all M predictions, plus per-station RMSE.

    MAE is the mean of ``|y - y_hat|``. The signed mean error would let
    over- and under-predictions cancel, which no reported MAE can mean.

    ``station_index`` gives each record's position in ``station_ids``; when
    omitted, ``actual`` and ``predicted`` may be ``(..., N)`` arrays and the
    last axis is the station axis.
    """
    y = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if y.shape != p.shape:
        raise ValueError(f"actual {y.shape} and predicted {p.shape} differ")
    if y.size == 0:
        raise ValueError("no prediction records")
    err = p - y
    rmse = math.sqrt(float(np.mean(err * err)))
    mae = float(np.mean(np.abs(err)))
    if station_index is None:
        per = err.reshape(-1, err.shape[-1]) if err.ndim > 1 else err[:, None]
        n = per.shape[1]
        station_rmse = np.sqrt(np.mean(per * per, axis=0))
    else:
        idx = np.asarray(station_index).ravel()
        if idx.shape != err.ravel().shape:
            raise ValueError("station_index must give one station per record")
        n = len(station_ids) if station_ids is not None else int(idx.max()) + 1
        sq = np.bincount(idx, weights=err.ravel() ** 2, minlength=n)
        counts = np.bincount(idx, minlength=n)
        with np.errstate(invalid="ignore", divide="ignore"):
            station_rmse = np.sqrt(sq / counts)
    ids = list(range(n)) if station_ids is None else [int(s) for s in station_ids]
    if len(ids) != n:
        raise ValueError(f"{len(ids)} station ids for {n} stations")
    return MetricsReport(variant, target, rmse, mae, ids, [float(v) for v in station_rmse], int(y.size))
