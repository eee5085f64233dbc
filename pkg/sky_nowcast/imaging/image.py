"""Sky images and the ROI / crop / downscale stages."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Final, Iterable, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from PIL import Image, UnidentifiedImageError

from ..errors import ConfigError, DataError, ShapeError

_LOGGER = logging.getLogger(__name__)

DEFAULT_OUT_WIDTH: Final[int] = 64


class Exposure(str, Enum):
    LONG = "long"
    SHORT = "short"


@dataclass(frozen=True, slots=True)
class SkyImage:
    """An H×W×C ``uint8`` frame with its file-name and date-modified timestamps."""

    pixels: np.ndarray
    ts_file_name: Optional[pd.Timestamp]
    ts_date_modified: Optional[pd.Timestamp]
    exposure: Exposure = Exposure.LONG
    site: str = ""
    ref: str = ""

    def __post_init__(self) -> None:
        pixels = self.pixels
        if pixels.ndim != 3:
            raise ShapeError(f"sky image must be H×W×C, got shape {pixels.shape}")
        height, width, channels = pixels.shape
        if height <= 0 or width <= 0:
            raise ShapeError("sky image must have positive height and width")
        if channels not in (3, 4):
            raise ShapeError(f"sky image must carry 3 or 4 channels, got {channels}")
        if pixels.dtype != np.uint8:
            raise ShapeError(f"sky image pixels must be uint8, got {pixels.dtype}")

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def channels(self) -> int:
        return int(self.pixels.shape[2])

    def with_pixels(self, pixels: np.ndarray) -> "SkyImage":
        return replace(self, pixels=pixels)


@dataclass(frozen=True, slots=True)
class RoiSpec:
    """Circular region of interest; ``center_px`` is ``(x, y)`` = (column, row)."""

    radius_px: float
    center_px: Tuple[float, float]

    def __post_init__(self) -> None:
        if self.radius_px <= 0:
            raise ConfigError("ROI radius must be > 0")

    @classmethod
    def from_mapping(cls, payload: Mapping[str, Any]) -> "RoiSpec":
        unknown = set(payload) - {"radius_px", "center_px"}
        if unknown:
            raise ConfigError(f"Unknown ROI keys: {', '.join(sorted(unknown))}")
        try:
            center = payload["center_px"]
            return cls(radius_px=float(payload["radius_px"]), center_px=(float(center[0]), float(center[1])))
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ConfigError("ROI needs a numeric 'radius_px' and a two-element 'center_px'") from exc

    def to_dict(self) -> Dict[str, Any]:
        return {"radius_px": self.radius_px, "center_px": list(self.center_px)}

    def crop_window(self) -> Tuple[int, int, int, int]:
        """``(x0, y0, x1, y1)`` of the 2R square centred on the ROI, end-exclusive."""

        side = int(round(2 * self.radius_px))
        x0 = int(round(self.center_px[0] - self.radius_px))
        y0 = int(round(self.center_px[1] - self.radius_px))
        return x0, y0, x0 + side, y0 + side

    def fits(self, height: int, width: int) -> bool:
        cx, cy = self.center_px
        r = self.radius_px
        return cx - r >= 0 and cy - r >= 0 and cx + r <= width and cy + r <= height


def disc_mask(height: int, width: int, center: Tuple[float, float], radius: float) -> np.ndarray:
    """Boolean disc using the pixel-centre convention: pixel (row i, col j) sits at (j+0.5, i+0.5)."""

    cols = np.arange(width, dtype=float) + 0.5 - center[0]
    rows = np.arange(height, dtype=float) + 0.5 - center[1]
    return (cols[np.newaxis, :] ** 2 + rows[:, np.newaxis] ** 2) <= radius * radius


def apply_roi(image: SkyImage, roi: RoiSpec) -> SkyImage:
    if not roi.fits(image.height, image.width):
        raise ConfigError(
            f"ROI (R={roi.radius_px}, C={roi.center_px}) exceeds a {image.width}×{image.height} frame"
        )
    inside = disc_mask(image.height, image.width, roi.center_px, roi.radius_px)
    pixels = image.pixels.copy()
    pixels[~inside] = 0
    return image.with_pixels(pixels)


def resize_box(pixels: np.ndarray, out_w: int) -> np.ndarray:
    """Area-averaging resize of an H×W×C ``uint8`` array to ``out_w``×``out_w``."""

    channels = [
        np.asarray(
            Image.fromarray(np.ascontiguousarray(pixels[:, :, c])).resize(
                (out_w, out_w), resample=Image.Resampling.BOX
            ),
            dtype=np.uint8,
        )
        for c in range(pixels.shape[2])
    ]
    return np.stack(channels, axis=2)


def crop_and_resize(image: SkyImage, roi: RoiSpec, out_w: int = DEFAULT_OUT_WIDTH) -> SkyImage:
    """Square-crop 2R around the ROI centre (zero-padding outside the frame) then box-downscale."""

    if out_w <= 0:
        raise ConfigError("output width must be > 0")
    x0, y0, x1, y1 = roi.crop_window()
    side = x1 - x0
    canvas = np.zeros((side, side, image.channels), dtype=np.uint8)
    sx0, sy0 = max(x0, 0), max(y0, 0)
    sx1, sy1 = min(x1, image.width), min(y1, image.height)
    if sx1 > sx0 and sy1 > sy0:
        canvas[sy0 - y0 : sy1 - y0, sx0 - x0 : sx1 - x0] = image.pixels[sy0:sy1, sx0:sx1]
    if (sx0, sy0, sx1, sy1) != (x0, y0, x1, y1):
        _LOGGER.debug("Crop window %s clamped to the frame and zero-padded", (x0, y0, x1, y1))
    return image.with_pixels(resize_box(canvas, out_w))


def process_image(image: SkyImage, roi: RoiSpec, out_w: int = DEFAULT_OUT_WIDTH) -> SkyImage:
    return crop_and_resize(apply_roi(image, roi), roi, out_w)


def mean_image(frames: Iterable[np.ndarray]) -> np.ndarray:
    """Per-pixel mean of equally shaped frames, as float64."""

    total: Optional[np.ndarray] = None
    count = 0
    for frame in frames:
        values = np.asarray(frame, dtype=np.float64)
        if total is None:
            total = np.zeros_like(values)
        elif values.shape != total.shape:
            raise ShapeError(f"frame shape {values.shape} differs from {total.shape}")
        total += values
        count += 1
    if total is None:
        raise DataError("mean_image needs at least one frame")
    return total / count


def decode_image(path: Path | str) -> np.ndarray:
    """Decode a JPEG/PNG into an H×W×3 ``uint8`` array."""

    try:
        with Image.open(path) as handle:
            return np.asarray(handle.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"{path}: unreadable image ({exc})") from exc


def encode_png(pixels: np.ndarray, path: Path | str) -> None:
    Image.fromarray(np.ascontiguousarray(pixels[:, :, :3])).save(path, format="PNG")


__all__ = [
    "DEFAULT_OUT_WIDTH",
    "Exposure",
    "RoiSpec",
    "SkyImage",
    "apply_roi",
    "crop_and_resize",
    "decode_image",
    "disc_mask",
    "encode_png",
    "mean_image",
    "process_image",
    "resize_box",
]
