"""Minimal reverse-mode array engine: tensors, ops, Adam, clipping, containers."""

from . import ops
from .optim import Adam, clip_gradients, global_grad_norm
from .tensor import Tensor, as_tensor, backward, no_grad, parameter, zero_grad

__all__ = [
    "Adam",
    "Tensor",
    "as_tensor",
    "backward",
    "clip_gradients",
    "global_grad_norm",
    "no_grad",
    "ops",
    "parameter",
    "zero_grad",
]
