"""Trip, weather and POI ingestion into hourly per-station feature tensors."""

from .dataset import Dataset, ingest
from .features import N_FEATURES, WindowSet, assemble_windows, scale_features
from .geo import haversine_m
from .pois import count_pois, read_pois
from .trips import StationRegistry, bucket_traffic, build_registry, read_trip_file
from .weather import aggregate_weather, read_weather

__all__ = [
    "Dataset",
    "N_FEATURES",
    "StationRegistry",
    "WindowSet",
    "aggregate_weather",
    "assemble_windows",
    "bucket_traffic",
    "build_registry",
    "count_pois",
    "haversine_m",
    "ingest",
    "read_pois",
    "read_trip_file",
    "read_weather",
    "scale_features",
]
