"""Run configuration: flat ``key=value`` files with ``#`` comments."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from . import attention as attn
from .model import TARGETS, VARIANTS, ModelConfig, variant_config


class ConfigError(ValueError):
    pass


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key=value`` lines. Blank lines and ``#`` comments are ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_key_values(text, str(path))


@dataclass
class RunConfig:
    data: str = ""
    out: str = "runs/default"
    variant: str = "lstm-attn"
    target: str = "pickup"
    seed: int = 0
    epochs: int = 100
    lr: float = 1e-3
    clip: float = 2.5
    clip_mode: str = "norm"
    batch: int = 64
    max_iterations: int = 0
    val_fraction: float = 0.2
    steps: int = 12
    horizon: int = 1
    hidden: int = 1024
    layers: int = 2
    dropout: float = 0.3
    spatial_width: int = 128
    temporal_width: int = 128
    context_mode: str = attn.EQUATION
    forget_bias: float = 1.0

    def validate(self) -> RunConfig:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {sorted(VARIANTS)}")
        if self.target not in TARGETS:
            raise ConfigError(f"unknown target {self.target!r}; expected one of {list(TARGETS)}")
        for name in ("epochs", "batch", "steps", "horizon", "hidden", "layers", "spatial_width", "temporal_width"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.max_iterations < 0:
            raise ConfigError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.clip <= 0:
            raise ConfigError(f"clip must be positive, got {self.clip}")
        if self.clip_mode not in ("norm", "value"):
            raise ConfigError(f"clip_mode must be norm or value, got {self.clip_mode!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must lie in [0, 1), got {self.val_fraction}")
        if self.context_mode not in (attn.EQUATION, attn.PROSE):
            raise ConfigError(f"context_mode must be {attn.EQUATION} or {attn.PROSE}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        return self

    @classmethod
    def from_mapping(cls, values: dict[str, str], source: str = "<config>") -> RunConfig:
        kinds = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in kinds:
                raise ConfigError(f"{source}: unknown key {key!r}")
            kwargs[key] = _coerce(key, raw, kinds[key], source)
        return cls(**kwargs)

    def merged(self, overrides: dict[str, str]) -> RunConfig:
        kinds = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, raw in overrides.items():
            if raw is None:
                continue
            if key not in kinds:
                raise ConfigError(f"unknown key {key!r}")
            changes[key] = _coerce(key, str(raw), kinds[key], "command line")
        return dataclasses.replace(self, **changes)

    def model_config(self, n_stations: int) -> ModelConfig:
        return variant_config(
            self.variant,
            n_stations=n_stations,
            steps=self.steps,
            horizon=self.horizon,
            hidden=self.hidden,
            layers=self.layers,
            target=self.target,
            dropout=self.dropout,
            spatial_width=self.spatial_width,
            temporal_width=self.temporal_width,
            context_mode=self.context_mode,
            forget_bias=self.forget_bias,
        )

    def to_lines(self) -> list[str]:
        return [f"{f.name}={getattr(self, f.name)}" for f in fields(self)]


def _coerce(key: str, raw: str, kind, source: str):
    kind = kind if isinstance(kind, str) else kind.__name__
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{source}: {key} expects {kind}, got {raw!r}") from None
    return raw


def load_run_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """File values first, then non-None ``overrides``; validated before return."""
    cfg = RunConfig.from_mapping(read_config_file(path), str(path)) if path else RunConfig()
    if overrides:
        cfg = cfg.merged(overrides)
    return cfg.validate()
