"""Mortality-after-discharge prediction from EHR tables and clinical notes."""

__version__ = "0.1.0"

from notepool.errors import (
    ConfigError,
    DiscoveryError,
    EvaluateError,
    FeaturizeError,
    IngestError,
    MetricsError,
    ModelError,
    NotepoolError,
    SynthError,
    UsageError,
)

__all__ = [
    "ConfigError",
    "DiscoveryError",
    "EvaluateError",
    "FeaturizeError",
    "IngestError",
    "MetricsError",
    "ModelError",
    "NotepoolError",
    "SynthError",
    "UsageError",
    "__version__",
]
