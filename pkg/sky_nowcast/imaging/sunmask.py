"""Fisheye sun localisation and the binary sun-mask channel."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Final, Mapping, Tuple

import numpy as np

from ..errors import ConfigError, DataError, ShapeError
from ..solar.geometry import SolarPosition
from .image import SkyImage, disc_mask

_LOGGER = logging.getLogger(__name__)

REFERENCE_WIDTH: Final[int] = 64
REFERENCE_RADIUS_PX: Final[float] = 5.0
MASK_ON: Final[int] = 255


class BelowHorizonError(DataError):
    """Raised when the sun cannot be placed on the image because it has set."""


class Projection(str, Enum):
    STEREOGRAPHIC = "stereographic"
    EQUIDISTANT = "equidistant"


@dataclass(frozen=True, slots=True)
class CameraModel:
    """Fisheye mapping; ``focal`` is relative to half the (post-resize) image width."""

    projection: Projection
    focal: float
    theta_c: float = 0.0
    width: int = REFERENCE_WIDTH

    def __post_init__(self) -> None:
        if self.focal <= 0:
            raise ConfigError("camera focal must be > 0")
        if not 0.0 <= self.theta_c < 360.0:
            raise ConfigError("camera theta_c must be within [0, 360)")
        if self.width <= 0:
            raise ConfigError("camera width must be > 0")

    @classmethod
    def from_mapping(cls, payload: Mapping[str, Any], width: int = REFERENCE_WIDTH) -> "CameraModel":
        unknown = set(payload) - {"projection", "focal", "theta_c"}
        if unknown:
            raise ConfigError(f"Unknown camera keys: {', '.join(sorted(unknown))}")
        raw = str(payload.get("projection", "")).strip().lower()
        try:
            projection = Projection(raw)
        except ValueError as exc:
            raise ConfigError(f"Unknown camera projection '{raw}'") from exc
        try:
            return cls(
                projection=projection,
                focal=float(payload["focal"]),
                theta_c=float(payload.get("theta_c", 0.0)),
                width=width,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("camera needs a numeric 'focal'") from exc

    def to_dict(self) -> Dict[str, Any]:
        return {"projection": self.projection.value, "focal": self.focal, "theta_c": self.theta_c}

    @property
    def mask_radius(self) -> float:
        return REFERENCE_RADIUS_PX * self.width / REFERENCE_WIDTH


@dataclass(frozen=True, slots=True)
class SunMask:
    mask: np.ndarray
    center: Tuple[float, float]
    radius_px: float

    @property
    def area(self) -> int:
        return int(self.mask.sum())


def radial_distance(cam: CameraModel, zenith_deg: float) -> float:
    """Normalised distance of the sun from the optical axis."""

    zenith = math.radians(zenith_deg)
    if cam.projection is Projection.STEREOGRAPHIC:
        return 2.0 * cam.focal * math.tan(zenith / 2.0)
    return cam.focal * zenith


def sun_center(cam: CameraModel, pos: SolarPosition) -> Tuple[float, float]:
    """Pixel coordinates ``(x_p, y_p)`` of the sun on a ``cam.width`` square image."""

    if pos.zenith >= 90.0:
        raise BelowHorizonError(f"sun is below the horizon (zenith {pos.zenith:.2f}°)")
    radius = radial_distance(cam, pos.zenith)
    angle = math.radians(pos.azimuth - cam.theta_c)
    half = cam.width / 2.0
    x_c = radius * math.sin(angle)
    y_c = radius * math.cos(angle)
    return half * (1.0 + x_c), half * (1.0 + y_c)


def sun_centers(cam: CameraModel, zenith: np.ndarray, azimuth: np.ndarray) -> np.ndarray:
    """Array form of :func:`sun_center`; returns an N×2 array of ``(x_p, y_p)``."""

    zenith = np.radians(np.asarray(zenith, dtype=float))
    if np.any(zenith >= math.pi / 2):
        raise BelowHorizonError("sun is below the horizon for at least one instant")
    if cam.projection is Projection.STEREOGRAPHIC:
        radius = 2.0 * cam.focal * np.tan(zenith / 2.0)
    else:
        radius = cam.focal * zenith
    angle = np.radians(np.asarray(azimuth, dtype=float) - cam.theta_c)
    half = cam.width / 2.0
    return np.column_stack([half * (1.0 + radius * np.sin(angle)), half * (1.0 + radius * np.cos(angle))])


def render_sun_mask(cam: CameraModel, pos: SolarPosition) -> SunMask:
    center = sun_center(cam, pos)
    radius = cam.mask_radius
    mask = disc_mask(cam.width, cam.width, center, radius)
    if not mask.any():
        _LOGGER.warning(
            "Sun mask fully clipped: centre (%.1f, %.1f) lies outside the %d px frame", center[0], center[1], cam.width
        )
    return SunMask(mask=mask, center=center, radius_px=radius)


def append_mask_channel(image: SkyImage, mask: SunMask) -> SkyImage:
    if image.channels != 3:
        raise ShapeError(f"mask channel needs a 3-channel image, got {image.channels}")
    if mask.mask.shape != (image.height, image.width):
        raise ShapeError(f"mask shape {mask.mask.shape} does not match image {image.height}×{image.width}")
    channel = np.where(mask.mask, MASK_ON, 0).astype(np.uint8)
    return image.with_pixels(np.concatenate([image.pixels, channel[:, :, np.newaxis]], axis=2))


__all__ = [
    "BelowHorizonError",
    "CameraModel",
    "Projection",
    "SunMask",
    "append_mask_channel",
    "radial_distance",
    "render_sun_mask",
    "sun_center",
    "sun_centers",
]
