from __future__ import annotations

import asyncio
import contextlib
import hashlib
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, AsyncIterator, Dict, Iterator, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from ..errors import DataError
from ..imaging.tensor import read_tensor, write_tensor

LOCK_NAME = ".sky_nowcast.lock"
INGEST_INDEX = "ingest_index.json"
TENSOR_DIR = "tensors"
TENSOR_SUFFIX = ".skyt"


class StoreLockedError(RuntimeError):
    """Raised when another run holds the output directory."""


@dataclass(slots=True)
class IngestEntry:
    """What a source file looked like when it was last ingested."""

    path: str
    sha1: str
    mtime: float
    size: int


def file_sha1(path: Path) -> str:
    digest = hashlib.sha1()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def tensor_name(ref: str) -> str:
    return ref.replace("/", "__").replace("\\", "__") + TENSOR_SUFFIX


class ArtifactStore:
    """Output directory with atomic writes and an exclusive lock file."""

    def __init__(self, root: Path | str) -> None:
        self._root = Path(root)
        self._lock = asyncio.Lock()

    @property
    def root(self) -> Path:
        return self._root

    def path(self, name: str) -> Path:
        return self._root / name

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    @contextlib.asynccontextmanager
    async def exclusive(self) -> AsyncIterator["ArtifactStore"]:
        self._root.mkdir(parents=True, exist_ok=True)
        lock_path = self.path(LOCK_NAME)
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError as exc:
            raise StoreLockedError(f"{self._root} is locked by another run ({lock_path})") from exc
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield self
        finally:
            with contextlib.suppress(FileNotFoundError):
                lock_path.unlink()

    def _write_atomic(self, target: Path, payload: bytes) -> None:
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp_path = target.with_name(target.name + ".tmp")
        tmp_path.write_bytes(payload)
        tmp_path.replace(target)

    async def write_bytes(self, name: str, payload: bytes) -> Path:
        target = self.path(name)
        async with self._lock:
            self._write_atomic(target, payload)
        return target

    async def write_text(self, name: str, text: str) -> Path:
        return await self.write_bytes(name, text.encode("utf-8"))

    async def write_json(self, name: str, payload: Any) -> Path:
        return await self.write_text(name, json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")

    async def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        return await self.write_text(name, frame.to_csv(index=False, lineterminator="\n"))

    def read_csv(self, name: str, **kwargs: Any) -> pd.DataFrame:
        path = self.path(name)
        if not path.exists():
            raise DataError(f"{path} does not exist; run the step that produces it first")
        return pd.read_csv(path, **kwargs)

    def read_json(self, name: str) -> Any:
        path = self.path(name)
        if not path.exists():
            raise DataError(f"{path} does not exist; run the step that produces it first")
        try:
            return json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path} is not valid JSON") from exc

    def load_ingest_index(self) -> Dict[str, IngestEntry]:
        """Entries from the previous ingest; a missing or unreadable index means a fresh start."""

        path = self.path(INGEST_INDEX)
        if not path.exists():
            return {}
        try:
            payload = json.loads(path.read_text())
        except json.JSONDecodeError:
            return {}
        return {
            item["path"]: IngestEntry(
                path=item["path"],
                sha1=item.get("sha1", ""),
                mtime=float(item.get("mtime", 0.0)),
                size=int(item.get("size", 0)),
            )
            for item in payload.get("files", [])
            if "path" in item
        }

    async def save_ingest_index(self, entries: Mapping[str, IngestEntry], root: Optional[Path] = None) -> Path:
        payload: Dict[str, Any] = {"files": [asdict(entries[key]) for key in sorted(entries)]}
        if root is not None:
            payload["root"] = str(Path(root).resolve())
        return await self.write_json(INGEST_INDEX, payload)

    def ingest_root(self) -> Path:
        """Directory the last ``ingest`` read its images from."""

        payload = self.read_json(INGEST_INDEX)
        root = payload.get("root") if isinstance(payload, dict) else None
        if not root:
            raise DataError(f"{self.path(INGEST_INDEX)} does not record an image directory; re-run ingest")
        return Path(root)

    def tensor_path(self, ref: str) -> Path:
        return self.path(TENSOR_DIR) / tensor_name(ref)

    def save_tensor(self, ref: str, pixels: np.ndarray) -> Path:
        """Safe to call from worker threads; every ref owns its file."""

        target = self.tensor_path(ref)
        write_tensor(target, pixels)
        return target

    def tensors(self, refs: Sequence[str]) -> "TensorDirectory":
        return TensorDirectory(self.path(TENSOR_DIR), refs)


class TensorDirectory(Mapping[str, np.ndarray]):
    """Read-only view of stored frames keyed by image reference."""

    def __init__(self, root: Path, refs: Sequence[str], cache_size: int = 4096) -> None:
        self._root = root
        self._refs = tuple(dict.fromkeys(refs))
        self._known = set(self._refs)
        self._cache: Dict[str, np.ndarray] = {}
        self._cache_size = cache_size

    def __getitem__(self, ref: str) -> np.ndarray:
        if ref not in self._known:
            raise KeyError(ref)
        cached = self._cache.get(ref)
        if cached is not None:
            return cached
        pixels = read_tensor(self._root / tensor_name(ref))
        if len(self._cache) < self._cache_size:
            self._cache[ref] = pixels
        return pixels

    def __iter__(self) -> Iterator[str]:
        return iter(self._refs)

    def __len__(self) -> int:
        return len(self._refs)

    def __contains__(self, ref: object) -> bool:
        return ref in self._known

    def get_path(self, ref: str) -> Optional[Path]:
        return self._root / tensor_name(ref) if ref in self._known else None


__all__ = [
    "ArtifactStore",
    "INGEST_INDEX",
    "IngestEntry",
    "StoreLockedError",
    "TensorDirectory",
    "file_sha1",
    "tensor_name",
]
