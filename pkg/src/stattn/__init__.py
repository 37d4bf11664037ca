"""Station-level bike-share traffic forecasting with spatial and temporal
attention over a two-layer recurrent encoder-decoder."""

from .errors import DataError, NumericError, ShapeError
from .model import VARIANTS, Forecaster, ModelConfig, build_variant, rmse_loss

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "Forecaster",
    "ModelConfig",
    "NumericError",
    "ShapeError",
    "VARIANTS",
    "build_variant",
    "rmse_loss",
]
