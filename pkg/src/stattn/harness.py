"""The workflow behind each CLI command: ingest, train, evaluate, plot-data,
subset.

A training run directory holds ``manifest.txt``, ``best.ckpt`` (lowest
validation loss) and ``final.ckpt``. Checkpoints are STATTN1 containers with
every model parameter under its own name plus the Adam moments
(``<name>.m1``, ``<name>.m2``) and ``adam.step``.
"""

from __future__ import annotations

import csv
import glob
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .data.dataset import ARTIFACT_FILE, HASH_FILE, REPORT_FILE, Dataset, ingest
from .errors import DataError, NumericError
from .metrics import MetricsReport, compute_metrics
from .model import Forecaster
from .numeric import container
from .training import TrainSettings, fit, predict_windows

log = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.txt"
BEST_CKPT = "best.ckpt"
FINAL_CKPT = "final.ckpt"
PRED_COLUMNS = ["station_id", "hour", "actual", "predicted"]


def format_hour(hour: int) -> str:
    return str(np.datetime64(int(hour), "h").astype("datetime64[m]")).replace("T", " ")


def parse_hour(text: str) -> int:
    try:
        return int(np.datetime64(text.strip().replace(" ", "T"), "h").astype(np.int64))
    except ValueError:
        raise DataError(f"bad hour {text!r}") from None


# ---------------------------------------------------------------- ingest


def run_ingest(trips_glob: str, weather: str, pois: str, out: str, **options) -> str:
    """Build the dataset artifact; returns its sha256."""
    paths = sorted(glob.glob(trips_glob))
    if not paths:
        raise DataError(f"no trip files match {trips_glob!r}")
    ds, report = ingest(paths, weather, pois, **options)
    digest = ds.save(out, report)
    log.info("wrote %s (%d stations, %d hours) sha256 %s", Path(out) / ARTIFACT_FILE,
             ds.n_stations, len(ds.hours), digest)
    return digest


def data_sha256(data_dir: str | Path) -> str:
    return container.file_sha256(Path(data_dir) / ARTIFACT_FILE)


# ---------------------------------------------------------------- train


class Manifest:
    """Append-only run record; every line is flushed so a crash keeps it."""

    def __init__(self, path: Path):
        self.path = path
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("# stattn run manifest\n")

    def write(self, line: str) -> None:
        with self.path.open("a") as fh:
            fh.write(line + "\n")


def read_manifest(path: str | Path) -> dict:
    """Returns ``{"config": RunConfig, "fields": {...}, "epochs": [...]}``."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no run manifest at {path}")
    config, fields, epochs = {}, {}, []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("epoch="):
            epochs.append({k: float(v) for k, v in (p.split("=", 1) for p in line.split())})
            continue
        key, _, value = line.partition("=")
        if key.startswith("config."):
            config[key[len("config."):]] = value
        else:
            fields[key] = value
    return {"config": RunConfig.from_mapping(config, str(path)), "fields": fields, "epochs": epochs}


def save_checkpoint(path: Path, model: Forecaster, optimizer) -> str:
    arrays = dict(model.state_arrays())
    arrays.update(optimizer.state_arrays())
    return container.save(path, arrays)


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no checkpoint at {path}")
    try:
        return container.load(path)
    except container.ContainerError as exc:
        raise DataError(f"{path}: {exc}") from exc


@dataclass
class TrainResult:
    out_dir: Path
    final_train_loss: float
    best_val_loss: float
    best_epoch: int
    epochs: int


def run_train(cfg: RunConfig) -> TrainResult:
    """Train one variant/target and write manifest plus checkpoints.

    A non-finite loss or gradient aborts with NumericError; the manifest
    written so far stays on disk with a ``status=diverged`` line.
    """
    cfg.validate()
    if not cfg.data:
        raise DataError("no dataset directory configured (key 'data')")
    ds = Dataset.load(cfg.data)
    digest = data_sha256(cfg.data)
    splits = ds.windows(cfg.target, cfg.steps, cfg.horizon, cfg.val_fraction)
    if len(splits["train"]) == 0:
        raise DataError("dataset yields no training windows")
    model = Forecaster(cfg.model_config(ds.n_stations), seed=cfg.seed)
    settings = TrainSettings(cfg.lr, cfg.clip, cfg.clip_mode, cfg.batch, cfg.epochs, cfg.max_iterations or None)

    out = Path(cfg.out)
    manifest = Manifest(out / MANIFEST_FILE)
    manifest.write("command=train")
    for line in cfg.to_lines():
        manifest.write("config." + line)
    manifest.write(f"seed={cfg.seed}")
    manifest.write(f"data_sha256={digest}")
    manifest.write(f"n_stations={ds.n_stations}")
    manifest.write(f"parameters={model.parameter_count()}")
    for name in ("train", "val", "test"):
        manifest.write(f"windows.{name}={len(splits[name])}")

    best = {"loss": math.inf, "epoch": 0}

    def on_epoch(epoch, train_loss, val_loss, history):
        manifest.write(f"epoch={epoch} train_loss={train_loss!r} val_loss={val_loss!r}")
        score = val_loss if math.isfinite(val_loss) else train_loss
        if score < best["loss"]:
            best.update(loss=score, epoch=epoch)
            save_checkpoint(out / BEST_CKPT, model, history.optimizer)

    try:
        history = fit(model, splits["train"], splits["val"], settings, seed=cfg.seed, on_epoch=on_epoch)
    except NumericError as exc:
        manifest.write(f"status=diverged {exc}")
        raise
    final_sha = save_checkpoint(out / FINAL_CKPT, model, history.optimizer)
    if best["epoch"] == 0:
        # every epoch scored NaN; keep best == final so evaluate still works
        save_checkpoint(out / BEST_CKPT, model, history.optimizer)
    manifest.write(f"best_epoch={best['epoch']}")
    manifest.write(f"final_ckpt_sha256={final_sha}")
    manifest.write("status=complete")
    return TrainResult(out, history.train_loss[-1], best["loss"], best["epoch"], len(history.train_loss))


# ---------------------------------------------------------------- evaluate


@dataclass
class EvaluationResult:
    report: MetricsReport
    metrics_path: Path
    predictions_path: Path


def restore_model(checkpoint: str | Path) -> tuple[Forecaster, RunConfig]:
    """Rebuild the model from a checkpoint and the manifest beside it."""
    checkpoint = Path(checkpoint)
    arrays = load_checkpoint(checkpoint)
    cfg = read_manifest(checkpoint.parent / MANIFEST_FILE)["config"]
    if "head.b" not in arrays:
        raise DataError(f"{checkpoint}: not a model checkpoint (no head.b)")
    n = int(arrays["head.b"].shape[0])
    model = Forecaster(cfg.model_config(n), seed=cfg.seed)
    try:
        model.load_state_arrays(arrays)
    except (KeyError, ValueError) as exc:
        raise DataError(f"{checkpoint}: {exc}") from exc
    return model, cfg


def run_evaluate(checkpoint: str | Path, data_dir: str | Path, split: str = "test",
                 out: str | Path | None = None) -> EvaluationResult:
    """Score a checkpoint on one split; writes metrics JSON and a prediction CSV.

    Inputs are only read. Outputs default to the checkpoint's directory.
    """
    if split not in ("train", "val", "test"):
        raise ValueError(f"split must be train, val or test, got {split!r}")
    model, cfg = restore_model(checkpoint)
    ds = Dataset.load(data_dir)
    if ds.n_stations != model.config.n_stations:
        raise DataError(
            f"checkpoint is for {model.config.n_stations} stations, dataset has {ds.n_stations}"
        )
    windows = ds.windows(cfg.target, cfg.steps, cfg.horizon, cfg.val_fraction)[split]
    if len(windows) == 0:
        raise DataError(f"split {split!r} has no windows")
    predicted = predict_windows(model, windows)
    actual = windows.targets()
    hours = windows.target_hours(ds.hours)
    report = compute_metrics(actual, predicted, station_ids=ds.registry.ids,
                             variant=cfg.variant, target=cfg.target)

    out_dir = Path(out) if out is not None else Path(checkpoint).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(checkpoint).stem
    metrics_path = out_dir / f"metrics_{stem}_{split}.json"
    pred_path = out_dir / f"predictions_{stem}_{split}.csv"
    doc = report.to_dict()
    doc.update(split=split, checkpoint_sha256=container.file_sha256(checkpoint),
               data_sha256=data_sha256(data_dir), windows=len(windows))
    metrics_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    write_predictions(pred_path, ds.registry.ids, hours, actual, predicted)
    log.info("%s %s on %s: RMSE %.4f MAE %.4f", cfg.variant, cfg.target, split, report.rmse, report.mae)
    return EvaluationResult(report, metrics_path, pred_path)


def write_predictions(path: Path, station_ids, hours, actual, predicted) -> None:
    """One row per (station, target hour[, lead]) ordered by station then hour.

    A ``lead`` column (1-based decoder step) is added only when the horizon
    exceeds one, since hours then repeat across overlapping windows.
    """
    B, tau, N = actual.shape
    columns = PRED_COLUMNS + (["lead"] if tau > 1 else [])
    labels = {int(h): format_hour(h) for h in np.unique(hours)}
    order = np.lexsort((np.broadcast_to(np.arange(tau), (B, tau)).ravel(), hours.ravel()))
    flat_hours = hours.ravel()[order]
    flat_lead = np.broadcast_to(np.arange(1, tau + 1), (B, tau)).ravel()[order]
    act = actual.reshape(B * tau, N)[order]
    pred = predicted.reshape(B * tau, N)[order]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for j, sid in enumerate(station_ids):
            for r in range(len(order)):
                row = [int(sid), labels[int(flat_hours[r])], repr(float(act[r, j])), repr(float(pred[r, j]))]
                if tau > 1:
                    row.append(int(flat_lead[r]))
                writer.writerow(row)


# ---------------------------------------------------------------- plot-data


def run_plot_data(pred_csv: str | Path, station: int, date_from: str, date_to: str,
                  out: str | Path | None = None) -> tuple[Path, int]:
    """Hour-ordered series of one station between two dates (inclusive).

    Cells are copied verbatim from the prediction CSV. Returns the output
    path and row count.
    """
    pred_csv = Path(pred_csv)
    if not pred_csv.exists():
        raise DataError(f"no prediction file at {pred_csv}")
    lo = _day_start(date_from)
    hi = _day_start(date_to) + 23
    if hi < lo:
        raise ValueError(f"--from {date_from} is after --to {date_to}")
    with pred_csv.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[: len(PRED_COLUMNS)] != PRED_COLUMNS:
            raise DataError(f"{pred_csv}: expected columns {PRED_COLUMNS}, got {header}")
        rows = list(reader)
    known = sorted({int(r[0]) for r in rows})
    if station not in known:
        nearest = sorted(known, key=lambda s: (abs(s - station), s))[:5]
        raise DataError(f"station {station} not in {pred_csv}; nearest ids: {nearest}")
    keyed = []
    for r in rows:
        if int(r[0]) != station:
            continue
        h = parse_hour(r[1])
        if lo <= h <= hi:
            keyed.append(((h, int(r[4]) if len(r) > 4 else 1), r))
    keyed.sort(key=lambda kv: kv[0])
    if out is None:
        out = pred_csv.parent / f"series_{station}_{date_from}_{date_to}.csv"
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(r for _, r in keyed)
    if not keyed:
        log.warning("no rows for station %d between %s and %s; wrote header only", station, date_from, date_to)
    return out, len(keyed)


def _day_start(text: str) -> int:
    try:
        return int(np.datetime64(text.strip(), "D").astype("datetime64[h]").astype(np.int64))
    except ValueError:
        raise ValueError(f"bad date {text!r}; expected YYYY-MM-DD") from None


# ---------------------------------------------------------------- subset


def run_subset(data_dir: str | Path, count: int, out: str | Path | None = None) -> tuple[Path, str]:
    """Write the equal-stride station subset as a new artifact directory."""
    data_dir = Path(data_dir)
    ds = Dataset.load(data_dir)
    if not 1 <= count <= ds.n_stations:
        raise ValueError(f"--count must lie in 1..{ds.n_stations}, got {count}")
    sub = ds.subset(count)
    if out is None:
        out = data_dir.parent / f"{data_dir.name}-subset{count}"
    report = {"source_sha256": data_sha256(data_dir), "count": count,
              "station_ids": [int(s) for s in sub.registry.ids]}
    digest = sub.save(out, report)
    return Path(out), digest


__all__ = [
    "BEST_CKPT", "FINAL_CKPT", "HASH_FILE", "MANIFEST_FILE", "REPORT_FILE",
    "read_manifest", "restore_model", "run_evaluate", "run_ingest", "run_plot_data",
    "run_subset", "run_train",
]
