"""Hybrid quantum-kernel one-class SVM anomaly detection for CPS telemetry."""

from .errors import ConfigError, ConvergenceError, DataError

__version__ = "0.1.0"

__all__ = ["ConfigError", "ConvergenceError", "DataError", "__version__"]
