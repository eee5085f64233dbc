"""Solar irradiance estimation and nowcasting from ground-based sky images."""

from .app import run

__all__ = ["run"]
