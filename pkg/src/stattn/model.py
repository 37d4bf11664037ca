"""Encoder-decoder forecaster with spatial and temporal attention, plus the
attention-free baseline built from the same parts.

Inputs are ``(B, T, N*s)`` arrays laid out station-major (feature ``k`` of the
flattened vector is station ``k // s``, feature ``k % s``). Outputs are
``(B, tau, N)`` traffic predictions in raw count units.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import attention as attn
from .cells import GRU, LSTM, CellParams, RecurrentState, init_cell, stacked_step, zero_state
from .errors import ShapeError
from .numeric import ops
from .numeric.tensor import Tensor, as_tensor, no_grad, parameter

VARIANTS = {
    "lstm-attn": (LSTM, True),
    "gru-attn": (GRU, True),
    "lstm-base": (LSTM, False),
    "gru-base": (GRU, False),
}
TARGETS = ("pickup", "dropoff")


@dataclass
class ModelConfig:
    n_stations: int
    n_features: int = 19
    steps: int = 12
    horizon: int = 1
    hidden: int = 1024
    layers: int = 2
    cell: str = LSTM
    attention: bool = True
    target: str = "pickup"
    dropout: float = 0.3
    spatial_width: int = 128
    temporal_width: int = 128
    context_mode: str = attn.EQUATION
    forget_bias: float = 1.0

    def __post_init__(self):
        for name in ("n_stations", "n_features", "steps", "horizon", "hidden", "layers",
                     "spatial_width", "temporal_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.cell not in (LSTM, GRU):
            raise ValueError(f"unknown cell kind {self.cell!r}")
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.context_mode not in (attn.EQUATION, attn.PROSE):
            raise ValueError(f"unknown context mode {self.context_mode!r}")

    @property
    def input_width(self) -> int:
        return self.n_stations * self.n_features

    @property
    def variant(self) -> str:
        return f"{self.cell}-{'attn' if self.attention else 'base'}"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> ModelConfig:
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in known})


def variant_config(variant: str, **kwargs) -> ModelConfig:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {sorted(VARIANTS)}")
    cell, use_attention = VARIANTS[variant]
    return ModelConfig(cell=cell, attention=use_attention, **kwargs)


class Forecaster:
    """Trainable model. ``params`` maps checkpoint names to parameter tensors."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        c = config
        self.enc_layers: list[CellParams] = []
        self.dec_layers: list[CellParams] = []
        for stack, prefix, first_in in ((self.enc_layers, "enc", c.input_width),
                                        (self.dec_layers, "dec", c.n_stations)):
            for layer in range(c.layers):
                stack.append(init_cell(
                    c.cell, first_in if layer == 0 else c.hidden, c.hidden, rng,
                    prefix=f"{prefix}.l{layer}.", forget_bias=c.forget_bias,
                ))
        # decoder input: learned start vector, then the projected previous prediction
        self.dec_start = parameter(np.zeros(c.n_stations), "dec.start")
        self.dec_feedback = parameter(
            rng.uniform(-1.0, 1.0, (c.n_stations, c.n_stations)) / np.sqrt(c.n_stations), "dec.feedback"
        )
        self.spatial = self.temporal = None
        head_in = c.hidden
        if c.attention:
            self.spatial = attn.init_spatial(c.spatial_width, c.hidden, c.steps, rng)
            self.temporal = attn.init_temporal(c.temporal_width, c.hidden, rng)
            head_in += 2 * c.hidden if c.context_mode == attn.EQUATION else c.hidden
        self.head_W = parameter(rng.uniform(-1.0, 1.0, (c.n_stations, head_in)) / np.sqrt(head_in), "head.W")
        self.head_b = parameter(np.zeros(c.n_stations), "head.b")

        tensors = [t for layer in self.enc_layers + self.dec_layers for t in layer.tensors()]
        tensors += [self.dec_start, self.dec_feedback]
        if c.attention:
            tensors += self.spatial.tensors() + self.temporal.tensors()
        tensors += [self.head_W, self.head_b]
        self.params: dict[str, Tensor] = {t.name: t for t in tensors}

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            if name not in arrays:
                raise KeyError(f"checkpoint has no entry {name!r}")
            if arrays[name].shape != p.shape:
                raise ShapeError(f"{name}: checkpoint shape {arrays[name].shape} != model shape {p.shape}")
            p.data = np.array(arrays[name], dtype=np.float64)

    # ------------------------------------------------------------------ forward

    def _check_inputs(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        c = self.config
        if x.ndim != 3 or x.shape[1:] != (c.steps, c.input_width):
            raise ShapeError(f"inputs must be (batch, {c.steps}, {c.input_width}), got {x.shape}")
        return x

    def encode(self, inputs, training: bool = False, rng: np.random.Generator | None = None):
        """Run the encoder.

        Returns ``(hiddens, final_states, spatial_weights)`` where ``hiddens`` is
        ``(B, T, H)`` of top-layer states and ``spatial_weights`` is ``(B, T, K)``
        (None without attention).
        """
        x = self._check_inputs(inputs)
        c = self.config
        keep = 1.0 - c.dropout
        batch = x.shape[0]
        states = [zero_state(c.cell, batch, c.hidden) for _ in range(c.layers)]
        weights_trace = []
        if c.attention:
            window = Tensor(np.ascontiguousarray(x.transpose(0, 2, 1)))
            projection = attn.spatial_projection(window, self.spatial)
        tops = []
        for t in range(c.steps):
            step_in = Tensor(x[:, t, :])
            if c.attention:
                scores = attn.spatial_scores(window, states[-1], self.spatial, projection)
                alpha = attn.spatial_weights(scores)
                weights_trace.append(alpha.data)
                step_in = attn.spatial_reweight(step_in, alpha)
            states = stacked_step(step_in, states, self.enc_layers, keep, training, rng)
            tops.append(states[-1].h)
        hiddens = ops.stack(tops, axis=1)
        spatial_trace = np.stack(weights_trace, axis=1) if weights_trace else None
        return hiddens, states, spatial_trace

    def decode(
        self,
        hiddens: Tensor,
        states: list[RecurrentState],
        horizon: int | None = None,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ):
        """Run the decoder from the encoder's final states.

        Returns ``(predictions (B, tau, N), temporal_weights (B, tau, T) | None)``.
        """
        c = self.config
        horizon = c.horizon if horizon is None else horizon
        if horizon < 1:
            raise ValueError(f"decoder horizon must be >= 1, got {horizon}")
        keep = 1.0 - c.dropout
        batch = hiddens.shape[0]
        step_in = ops.broadcast_to(self.dec_start, (batch, c.n_stations))
        preds, gammas = [], []
        for _ in range(horizon):
            states = stacked_step(step_in, states, self.dec_layers, keep, training, rng)
            h_dec = states[-1].h
            if c.attention:
                scores = attn.temporal_scores(hiddens, h_dec, self.temporal)
                context, gamma = attn.temporal_context(hiddens, h_dec, scores, c.context_mode)
                gammas.append(gamma.data)
                head_in = ops.concat([context, h_dec], axis=-1)
            else:
                head_in = h_dec
            y = ops.linear(head_in, self.head_W, self.head_b)
            preds.append(y)
            step_in = ops.linear(y, self.dec_feedback)
        temporal_trace = np.stack(gammas, axis=1) if gammas else None
        return ops.stack(preds, axis=1), temporal_trace

    def forward(self, inputs, training: bool = False, rng: np.random.Generator | None = None):
        hiddens, states, spatial = self.encode(inputs, training, rng)
        preds, temporal = self.decode(hiddens, states, training=training, rng=rng)
        return preds, attn.AttentionTrace(spatial, temporal)

    def predict(self, inputs) -> np.ndarray:
        with no_grad():
            return self.forward(inputs)[0].data


def rmse_loss(predictions: Tensor, targets) -> Tensor:
    """Root of the mean squared error over every batch element, step and station."""
    targets = as_tensor(targets)
    if predictions.shape != targets.shape:
        raise ShapeError(f"predictions {predictions.shape} and targets {targets.shape} differ")
    return ops.sqrt(ops.mean_square(predictions - targets))


def build_variant(variant: str, seed: int = 0, **config) -> Forecaster:
    return Forecaster(variant_config(variant, **config), seed=seed)
