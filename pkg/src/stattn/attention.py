"""Spatial attention over flattened station features and temporal attention
over encoder hidden states.

Shapes, with ``K = N * s`` flattened features, ``T`` encoder steps, ``H``
hidden width, ``m``/``m2`` attention widths and a leading batch axis ``B``:

* spatial window: ``(B, K, T)``; row ``k`` is feature ``k``'s full history
* spatial params: ``v (m,)``, ``W (m, 2H)``, ``U (m, T)``, ``b (m,)``
* temporal params: ``v (m2,)``, ``W (m2, 2H)``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import RecurrentState
from .errors import NumericError, ShapeError
from .numeric import ops
from .numeric.tensor import Tensor, parameter

EQUATION = "equation"
PROSE = "prose"


@dataclass
class SpatialAttentionParams:
    v: Tensor
    W: Tensor
    U: Tensor
    b: Tensor

    def __post_init__(self):
        m = self.v.shape[0]
        if m < 1:
            raise ShapeError("spatial attention width must be >= 1")
        if self.W.shape[0] != m or self.U.shape[0] != m or self.b.shape != (m,):
            raise ShapeError(
                f"spatial attention shapes disagree: v {self.v.shape}, W {self.W.shape}, "
                f"U {self.U.shape}, b {self.b.shape}"
            )

    @property
    def steps(self) -> int:
        return self.U.shape[1]

    def tensors(self) -> list[Tensor]:
        return [self.v, self.W, self.U, self.b]


@dataclass
class TemporalAttentionParams:
    v: Tensor
    W: Tensor

    def __post_init__(self):
        if self.W.shape[0] != self.v.shape[0] or self.W.shape[1] % 2:
            raise ShapeError(f"temporal attention shapes disagree: v {self.v.shape}, W {self.W.shape}")

    def tensors(self) -> list[Tensor]:
        return [self.v, self.W]


@dataclass
class AttentionTrace:
    """Attention weights recorded during a forward pass.

    ``spatial`` is ``(B, T, K)``; ``temporal`` is ``(B, tau, T)``. Either may be
    None for variants without that attention.
    """

    spatial: np.ndarray | None = None
    temporal: np.ndarray | None = None


def init_spatial(width: int, hidden: int, steps: int, rng: np.random.Generator, prefix="attn.spatial.") -> SpatialAttentionParams:
    def u(shape, fan_in):
        return rng.uniform(-1.0, 1.0, shape) / np.sqrt(fan_in)

    return SpatialAttentionParams(
        parameter(u((width,), width), prefix + "v"),
        parameter(u((width, 2 * hidden), 2 * hidden), prefix + "W"),
        parameter(u((width, steps), steps), prefix + "U"),
        parameter(np.zeros(width), prefix + "b"),
    )


def init_temporal(width: int, hidden: int, rng: np.random.Generator, prefix="attn.temporal.") -> TemporalAttentionParams:
    return TemporalAttentionParams(
        parameter(rng.uniform(-1.0, 1.0, (width,)) / np.sqrt(width), prefix + "v"),
        parameter(rng.uniform(-1.0, 1.0, (width, 2 * hidden)) / np.sqrt(2 * hidden), prefix + "W"),
    )


def spatial_projection(window: Tensor, params: SpatialAttentionParams) -> Tensor:
    """``U f^k + b`` for every feature; independent of the step, so computed once."""
    if window.shape[-1] != params.steps:
        raise ShapeError(f"window has {window.shape[-1]} steps but U expects {params.steps}")
    return ops.linear(window, params.U, params.b)


def spatial_scores(
    window: Tensor,
    prev: RecurrentState,
    params: SpatialAttentionParams,
    projection: Tensor | None = None,
) -> Tensor:
    """Score every flattened feature against the previous encoder state.

    Returns ``(B, K)`` (or ``(K,)`` for an unbatched window).
    """
    if projection is None:
        projection = spatial_projection(window, params)
    # GRU carries no cell state; its slot is held at zero
    cell = prev.c if prev.c is not None else Tensor(np.zeros(prev.h.shape))
    hc = ops.concat([prev.h, cell], axis=-1)
    if hc.shape[-1] != params.W.shape[1]:
        raise ShapeError(f"state width {hc.shape[-1]} does not match W {params.W.shape}")
    state_term = ops.linear(hc, params.W)
    if state_term.ndim == 2:
        state_term = ops.reshape(state_term, (state_term.shape[0], 1, state_term.shape[1]))
    z = ops.tanh(projection + state_term)
    return z @ params.v


def spatial_weights(scores: Tensor) -> Tensor:
    if not np.all(np.isfinite(scores.data)):
        raise NumericError("spatial scores contain non-finite values")
    return ops.softmax(scores, axis=-1)


def spatial_reweight(features: Tensor, weights: Tensor) -> Tensor:
    if features.shape != weights.shape:
        raise ShapeError(f"features {features.shape} and weights {weights.shape} differ")
    return features * weights


def temporal_scores(encoder_hiddens: Tensor, decoder_hidden: Tensor, params: TemporalAttentionParams) -> Tensor:
    """Concat-style scores of the decoder state against each encoder step.

    ``W [h_t; h_dec]`` is evaluated as ``W_enc h_t + W_dec h_dec`` with ``W``
    split column-wise, which is the same product without materialising the
    concatenation for every step.
    """
    H = encoder_hiddens.shape[-1]
    if decoder_hidden.shape[-1] != H or params.W.shape[1] != 2 * H:
        raise ShapeError(
            f"hidden widths disagree: encoder {H}, decoder {decoder_hidden.shape[-1]}, W {params.W.shape}"
        )
    enc_term = ops.linear(encoder_hiddens, params.W[:, :H])  # (B, T, m2)
    dec_term = ops.linear(decoder_hidden, params.W[:, H:])  # (B, m2)
    if dec_term.ndim == 2:
        dec_term = ops.reshape(dec_term, (dec_term.shape[0], 1, dec_term.shape[1]))
    return ops.tanh(enc_term + dec_term) @ params.v


def temporal_context(
    encoder_hiddens: Tensor,
    decoder_hidden: Tensor,
    scores: Tensor,
    mode: str = EQUATION,
) -> tuple[Tensor, Tensor]:
    """Softmax the scores and return ``(context, weights)``.

    In ``equation`` mode the context is the weighted sum of the concatenations
    ``[h_t; h_dec]``. Since the weights sum to one, the decoder half of that sum
    is ``h_dec`` itself, so it is emitted directly. ``prose`` mode returns only
    the weighted sum of encoder states.
    """
    if scores.shape != encoder_hiddens.shape[:-1]:
        raise ShapeError(f"scores {scores.shape} do not match encoder steps {encoder_hiddens.shape[:-1]}")
    gamma = ops.softmax(scores, axis=-1)
    weighted = ops.sum(ops.reshape(gamma, gamma.shape + (1,)) * encoder_hiddens, axis=-2)
    if mode == EQUATION:
        return ops.concat([weighted, decoder_hidden], axis=-1), gamma
    if mode == PROSE:
        return weighted, gamma
    raise ValueError(f"unknown temporal context mode {mode!r}")
