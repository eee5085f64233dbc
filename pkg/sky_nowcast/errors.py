"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class ConfigError(RuntimeError):
    """Raised when pipeline configuration is missing or invalid."""


class DataError(RuntimeError):
    """Raised when input data violates a pipeline contract."""


class ShapeError(DataError):
    """Raised when array dimensions do not line up."""


__all__ = ["ConfigError", "DataError", "ShapeError"]
