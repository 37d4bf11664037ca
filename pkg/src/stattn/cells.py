"""LSTM and GRU cells and the two-layer stack used by encoder and decoder.

All steps are batched: ``x`` is ``(batch, input_dim)`` and states are
``(batch, hidden_dim)``.

LSTM gate blocks are stacked in the order input, forget, candidate, output.
GRU blocks are update, reset, candidate, and the new state is
``h' = (1 - z) * h + z * n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .numeric import ops
from .numeric.tensor import Tensor, parameter

LSTM = "lstm"
GRU = "gru"
_GATES = {LSTM: 4, GRU: 3}


@dataclass
class RecurrentState:
    h: Tensor
    c: Tensor | None = None


@dataclass
class CellParams:
    kind: str
    input_dim: int
    hidden_dim: int
    w_ih: Tensor
    w_hh: Tensor
    b: Tensor

    def __post_init__(self):
        if self.kind not in _GATES:
            raise ValueError(f"unknown cell kind {self.kind!r}")
        rows = _GATES[self.kind] * self.hidden_dim
        expect = {
            "w_ih": (rows, self.input_dim),
            "w_hh": (rows, self.hidden_dim),
            "b": (rows,),
        }
        for field, shape in expect.items():
            got = getattr(self, field).shape
            if got != shape:
                raise ShapeError(f"{self.kind} {field}: expected {shape}, got {got}")

    def tensors(self) -> list[Tensor]:
        return [self.w_ih, self.w_hh, self.b]


def init_cell(
    kind: str,
    input_dim: int,
    hidden_dim: int,
    rng: np.random.Generator,
    prefix: str = "",
    forget_bias: float = 1.0,
) -> CellParams:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases (forget-gate bias for LSTM)."""
    rows = _GATES[kind] * hidden_dim
    w_ih = rng.uniform(-1.0, 1.0, (rows, input_dim)) / np.sqrt(input_dim)
    w_hh = rng.uniform(-1.0, 1.0, (rows, hidden_dim)) / np.sqrt(hidden_dim)
    b = np.zeros(rows)
    if kind == LSTM:
        b[hidden_dim : 2 * hidden_dim] = forget_bias
    return CellParams(
        kind,
        input_dim,
        hidden_dim,
        parameter(w_ih, prefix + "w_ih"),
        parameter(w_hh, prefix + "w_hh"),
        parameter(b, prefix + "b"),
    )


def zero_state(kind: str, batch: int, hidden_dim: int) -> RecurrentState:
    h = Tensor(np.zeros((batch, hidden_dim)))
    return RecurrentState(h, Tensor(np.zeros((batch, hidden_dim))) if kind == LSTM else None)


def _check(x: Tensor, state: RecurrentState, p: CellParams) -> None:
    if x.shape[-1] != p.input_dim:
        raise ShapeError(f"{p.kind} input width {x.shape[-1]} != cell input_dim {p.input_dim}")
    if state.h.shape[-1] != p.hidden_dim:
        raise ShapeError(f"{p.kind} state width {state.h.shape[-1]} != hidden_dim {p.hidden_dim}")


def lstm_step(x: Tensor, state: RecurrentState, p: CellParams) -> RecurrentState:
    _check(x, state, p)
    if state.c is None:
        raise ShapeError("LSTM step needs a cell state")
    H = p.hidden_dim
    gates = ops.linear(x, p.w_ih, p.b) + ops.linear(state.h, p.w_hh)
    i = ops.sigmoid(gates[..., 0:H])
    f = ops.sigmoid(gates[..., H : 2 * H])
    g = ops.tanh(gates[..., 2 * H : 3 * H])
    o = ops.sigmoid(gates[..., 3 * H : 4 * H])
    c = f * state.c + i * g
    h = o * ops.tanh(c)
    return RecurrentState(h, c)


def gru_step(x: Tensor, state: RecurrentState, p: CellParams) -> RecurrentState:
    _check(x, state, p)
    H = p.hidden_dim
    xw = ops.linear(x, p.w_ih, p.b)
    # the reset gate acts on the recurrent contribution to the candidate
    hw = ops.linear(state.h, p.w_hh)
    z = ops.sigmoid(xw[..., 0:H] + hw[..., 0:H])
    r = ops.sigmoid(xw[..., H : 2 * H] + hw[..., H : 2 * H])
    n = ops.tanh(xw[..., 2 * H : 3 * H] + r * hw[..., 2 * H : 3 * H])
    h = (1.0 - z) * state.h + z * n
    return RecurrentState(h)


def cell_step(x: Tensor, state: RecurrentState, p: CellParams) -> RecurrentState:
    return lstm_step(x, state, p) if p.kind == LSTM else gru_step(x, state, p)


def stacked_step(
    x: Tensor,
    states: Sequence[RecurrentState],
    layers: Sequence[CellParams],
    keep: float = 1.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> list[RecurrentState]:
    """Advance every layer by one step; dropout only between layers.

    The last element of the result is the top layer, whose state feeds attention.
    """
    if len(states) != len(layers):
        raise ShapeError(f"{len(states)} states for {len(layers)} layers")
    for lower, upper in zip(layers, layers[1:]):
        if lower.hidden_dim != upper.input_dim:
            raise ShapeError(
                f"layer chain mismatch: hidden {lower.hidden_dim} feeds input {upper.input_dim}"
            )
    out = []
    inp = x
    for k, (state, p) in enumerate(zip(states, layers)):
        if k > 0:
            inp = ops.dropout(inp, keep, rng, training)
        new = cell_step(inp, state, p)
        out.append(new)
        inp = new.h
    return out
