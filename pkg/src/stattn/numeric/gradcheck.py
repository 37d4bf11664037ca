"""Central finite differences for checking analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, no_grad, zero_grad


def numerical_grad(fn: Callable[[], float], param: Tensor, h: float = 1e-5, order: int = 2) -> np.ndarray:
    """Central differences of ``fn`` w.r.t. every entry of ``param`` (perturbed in place).

    ``order=2`` is the classic ``(f(x+h) - f(x-h)) / 2h``. ``order=4`` adds the
    ``+-2h`` points, which cancels the h^2 error term and lets a larger ``h``
    keep round-off down when gradients are tiny.
    """
    if order not in (2, 4):
        raise ValueError(f"unsupported stencil order {order}")
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)

    def at(i, orig, delta):
        flat[i] = orig + delta
        return fn()

    for i in range(flat.size):
        orig = flat[i]
        d1 = at(i, orig, h) - at(i, orig, -h)
        if order == 2:
            out[i] = d1 / (2.0 * h)
        else:
            d2 = at(i, orig, 2 * h) - at(i, orig, -2 * h)
            out[i] = (8.0 * d1 - d2) / (12.0 * h)
        flat[i] = orig
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-10) -> float:
    """``|a - n| / max(|a|, |n|)`` in the L2 sense, with a floor for all-zero pairs."""
    diff = float(np.linalg.norm(analytic - numeric))
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), floor)
    return diff / scale


def check_gradients(
    loss_fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5, order: int = 2
) -> dict[str, float]:
    """Relative error between backprop and finite differences for every parameter.

    ``loss_fn`` must rebuild the graph from the current parameter values on each
    call and be deterministic (no dropout).
    """
    zero_grad(params)
    backward(loss_fn(), params)
    report = {}

    def value() -> float:
        with no_grad():
            return float(loss_fn().data)

    for i, p in enumerate(params):
        fd = numerical_grad(value, p, h, order)
        report[p.name or f"param{i}"] = relative_error(p.grad, fd)
    return report
