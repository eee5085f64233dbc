"""Raw tensor container: a 64-byte header followed by row-major ``uint8`` pixels.

Header layout (little endian): magic ``SKYT``, u16 version, u8 dtype code, u8 ndim,
then H, W, C as u32, zero-padded to 64 bytes.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Final

import numpy as np

from ..errors import DataError

MAGIC: Final[bytes] = b"SKYT"
VERSION: Final[int] = 1
HEADER_SIZE: Final[int] = 64
DTYPE_U8: Final[int] = 1
_HEADER = struct.Struct("<4sHBB3I")


class TensorFormatError(DataError):
    """Raised for tensor files that do not follow the container layout."""


def encode_tensor(pixels: np.ndarray) -> bytes:
    if pixels.dtype != np.uint8 or pixels.ndim != 3:
        raise TensorFormatError(f"only H×W×C uint8 tensors are stored, got {pixels.dtype} {pixels.shape}")
    height, width, channels = pixels.shape
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_U8, 3, height, width, channels)
    return header.ljust(HEADER_SIZE, b"\0") + np.ascontiguousarray(pixels).tobytes(order="C")


def decode_tensor(payload: bytes) -> np.ndarray:
    if len(payload) < HEADER_SIZE:
        raise TensorFormatError("tensor payload shorter than its header")
    magic, version, dtype, ndim, height, width, channels = _HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise TensorFormatError(f"bad tensor magic {magic!r}")
    if version != VERSION:
        raise TensorFormatError(f"unsupported tensor version {version}")
    if dtype != DTYPE_U8 or ndim != 3:
        raise TensorFormatError(f"unsupported tensor dtype {dtype} / ndim {ndim}")
    expected = height * width * channels
    body = payload[HEADER_SIZE:]
    if len(body) != expected:
        raise TensorFormatError(f"tensor body holds {len(body)} bytes, header promises {expected}")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, channels).copy()


def write_tensor(path: Path | str, pixels: np.ndarray) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = target.with_suffix(target.suffix + ".tmp")
    tmp_path.write_bytes(encode_tensor(pixels))
    os.replace(tmp_path, target)


def read_tensor(path: Path | str) -> np.ndarray:
    try:
        payload = Path(path).read_bytes()
    except OSError as exc:
        raise TensorFormatError(f"{path}: cannot read tensor ({exc})") from exc
    return decode_tensor(payload)


__all__ = [
    "HEADER_SIZE",
    "TensorFormatError",
    "decode_tensor",
    "encode_tensor",
    "read_tensor",
    "write_tensor",
]
