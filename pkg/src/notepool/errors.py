"""Exception hierarchy shared across the package."""


class NotepoolError(Exception):
    """Base class for all errors raised by this package."""


class IngestError(NotepoolError):
    """Malformed or inconsistent input tables."""


class FeaturizeError(NotepoolError):
    """Vocabulary or feature construction failed."""


class MetricsError(NotepoolError):
    """Metric undefined for the given inputs."""


class ModelError(NotepoolError):
    """Model training or prediction failed."""


class EvaluateError(NotepoolError):
    """Split or model-comparison preconditions not met."""


class DiscoveryError(NotepoolError):
    """Sensitivity or keyword analysis undefined for the given inputs."""


class SynthError(NotepoolError):
    """Invalid synthetic-data configuration."""


class ConfigError(NotepoolError):
    """Invalid run configuration."""


class UsageError(NotepoolError):
    """Bad command-line invocation or missing input path."""
