"""Mini-batch training with global-norm clipping and Adam."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data.features import WindowSet
from .errors import NumericError
from .model import Forecaster, rmse_loss
from .numeric.optim import Adam, clip_gradients
from .numeric.tensor import backward, no_grad

log = logging.getLogger(__name__)


@dataclass
class TrainSettings:
    lr: float = 1e-3
    clip: float = 2.5
    clip_mode: str = "norm"
    batch: int = 64
    epochs: int = 100
    max_iterations: int | None = None


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    batch_loss: list[float] = field(default_factory=list)
    iterations: int = 0
    optimizer: Adam | None = None


def make_optimizer(model: Forecaster, settings: TrainSettings) -> Adam:
    # Adam itself refuses lr <= 0; a zero-lr run never calls step()
    return Adam(model.parameters(), lr=settings.lr if settings.lr > 0 else 1e-3)


def batch_indices(n: int, batch: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [order[i : i + batch] for i in range(0, n, batch)]


def train_epoch(
    model: Forecaster,
    optimizer: Adam,
    windows: WindowSet,
    settings: TrainSettings,
    rng: np.random.Generator,
    history: History | None = None,
) -> float:
    """One pass over shuffled batches; returns the mean batch loss.

    Raises:
        NumericError: on a non-finite loss or gradient, naming the batch.
    """
    if len(windows) == 0:
        raise ValueError("no training windows")
    losses = []
    params = model.parameters()
    for b, idx in enumerate(batch_indices(len(windows), settings.batch, rng)):
        if history is not None and settings.max_iterations is not None and history.iterations >= settings.max_iterations:
            break
        try:
            preds, _ = model.forward(windows.inputs(idx), training=True, rng=rng)
        except NumericError as exc:
            raise NumericError(f"batch {b}: {exc}") from exc
        loss = rmse_loss(preds, windows.targets(idx))
        value = float(loss.data)
        if not math.isfinite(value):
            raise NumericError(f"non-finite loss {value} at batch {b}")
        optimizer.zero_grad()
        backward(loss, params)
        try:
            clip_gradients(params, settings.clip, settings.clip_mode)
        except NumericError as exc:
            raise NumericError(f"batch {b}: {exc}") from exc
        if settings.lr > 0:
            optimizer.step(settings.lr)
        losses.append(value)
        if history is not None:
            history.batch_loss.append(value)
            history.iterations += 1
    return float(np.mean(losses)) if losses else float("nan")


def evaluate_rmse(model: Forecaster, windows: WindowSet, batch: int = 256) -> float:
    """RMSE over every window, step and station (dropout off)."""
    if len(windows) == 0:
        return float("nan")
    total = 0.0
    count = 0
    with no_grad():
        for start in range(0, len(windows), batch):
            idx = np.arange(start, min(start + batch, len(windows)))
            diff = model.predict(windows.inputs(idx)) - windows.targets(idx)
            total += float(np.sum(diff * diff))
            count += diff.size
    return math.sqrt(total / count)


def predict_windows(model: Forecaster, windows: WindowSet, batch: int = 256) -> np.ndarray:
    out = [model.predict(windows.inputs(np.arange(s, min(s + batch, len(windows)))))
           for s in range(0, len(windows), batch)]
    return np.concatenate(out) if out else np.zeros((0, windows.horizon, windows.n_stations))


def fit(
    model: Forecaster,
    train: WindowSet,
    val: WindowSet | None,
    settings: TrainSettings,
    seed: int = 0,
    on_epoch: Callable[[int, float, float, History], None] | None = None,
) -> History:
    """Train for ``settings.epochs`` epochs (or until ``max_iterations``)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    optimizer = make_optimizer(model, settings)
    history = History(optimizer=optimizer)
    for epoch in range(1, settings.epochs + 1):
        train_loss = train_epoch(model, optimizer, train, settings, rng, history)
        val_loss = evaluate_rmse(model, val, settings.batch) if val is not None and len(val) else float("nan")
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        log.info("epoch %d: train %.6g val %.6g", epoch, train_loss, val_loss)
        if on_epoch is not None:
            on_epoch(epoch, train_loss, val_loss, history)
        if settings.max_iterations is not None and history.iterations >= settings.max_iterations:
            break
    return history
