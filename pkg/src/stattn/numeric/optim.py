"""Adam and gradient clipping for lists of named parameter tensors."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..errors import NumericError
from .tensor import Tensor


def global_grad_norm(params: Sequence[Tensor]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return math.sqrt(total)


def clip_gradients(params: Sequence[Tensor], threshold: float, mode: str = "norm") -> float:
    """Clip gradients in place and return the global norm measured before clipping.

    ``mode="norm"`` rescales every gradient by ``threshold / norm`` when the
    global L2 norm exceeds ``threshold``; gradients are left untouched (same
    arrays, same bits) otherwise. ``mode="value"`` clamps each entry to
    ``[-threshold, threshold]``.

    Raises:
        NumericError: if any gradient entry is NaN or infinite.
    """
    if not threshold > 0:
        raise ValueError(f"clip threshold must be positive, got {threshold}")
    for p in params:
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise NumericError(f"non-finite gradient in parameter {p.name or p.node_id}")
    norm = global_grad_norm(params)
    if mode == "norm":
        if norm > threshold:
            grads = [p.grad for p in params]
            scale = threshold / norm
            # rounding can leave the rescaled norm an ulp above the threshold,
            # which would make a second clip move the bits again
            while True:
                for p, g in zip(params, grads):
                    if g is not None:
                        p.grad = g * scale
                if global_grad_norm(params) <= threshold:
                    break
                scale = np.nextafter(scale, 0.0)
    elif mode == "value":
        for p in params:
            if p.grad is not None and np.any(np.abs(p.grad) > threshold):
                p.grad = np.clip(p.grad, -threshold, threshold)
    else:
        raise ValueError(f"unknown clip mode {mode!r}")
    return norm


class Adam:
    """Adam with bias correction.

    Moments are keyed by parameter name so they can be checkpointed next to
    the parameters (``<name>.m1`` / ``<name>.m2``).
    """

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        if not lr > 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        names = [p.name for p in params]
        if None in names or len(set(names)) != len(names):
            raise ValueError("Adam needs uniquely named parameters")
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.m1 = {p.name: np.zeros_like(p.data) for p in self.params}
        self.m2 = {p.name: np.zeros_like(p.data) for p in self.params}

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        if not lr > 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        missing = [p.name for p in self.params if p.grad is None]
        if missing:
            raise ValueError(f"no gradient for parameters: {', '.join(missing)}")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for p in self.params:
            g = p.grad
            m1 = self.m1[p.name] = self.beta1 * self.m1[p.name] + (1.0 - self.beta1) * g
            m2 = self.m2[p.name] = self.beta2 * self.m2[p.name] + (1.0 - self.beta2) * g * g
            p.data = p.data - lr * (m1 / c1) / (np.sqrt(m2 / c2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for p in self.params:
            out[f"{p.name}.m1"] = self.m1[p.name]
            out[f"{p.name}.m2"] = self.m2[p.name]
        out["adam.step"] = np.array(float(self.step_count))
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for p in self.params:
            for key, store in ((f"{p.name}.m1", self.m1), (f"{p.name}.m2", self.m2)):
                if key not in arrays:
                    raise KeyError(f"optimizer state missing {key}")
                if arrays[key].shape != p.shape:
                    raise ValueError(f"{key} has shape {arrays[key].shape}, expected {p.shape}")
                store[p.name] = np.array(arrays[key], dtype=np.float64)
        self.step_count = int(arrays["adam.step"])
