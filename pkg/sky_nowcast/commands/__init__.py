"""Subcommands of the ``sky_nowcast`` command line."""

from __future__ import annotations

import argparse
import logging
from dataclasses import dataclass
from typing import Awaitable, Callable, List, Optional, Sequence

from ..alignment import AlignedPair, pairs_from_frame
from ..config import PipelineConfig, SiteConfig
from ..errors import DataError
from ..imaging.manifest import ImageManifest
from ..infra.scheduler import DayScheduler
from ..infra.store import ArtifactStore, TensorDirectory

_LOGGER = logging.getLogger(__name__)

MANIFEST_CSV = "manifest.csv"
IRRADIANCE_RAW_CSV = "irradiance_raw.csv"
REJECTS_CSV = "rejects.csv"
IMAGES_CSV = "images.csv"
IRRADIANCE_CSV = "irradiance.csv"
PAIRS_CSV = "pairs.csv"
PAIRS_TRAIN_CSV = "pairs_train.csv"
PAIRS_TEST_CSV = "pairs_test.csv"
ESTIMATOR_JSON = "estimator.json"


class CommandError(RuntimeError):
    """Raised for invalid command-line usage."""

    def __init__(self, message: str, exit_code: int = 2) -> None:
        super().__init__(message)
        self.exit_code = exit_code


@dataclass(slots=True)
class CommandContext:
    config: PipelineConfig
    site: SiteConfig
    store: ArtifactStore
    scheduler: DayScheduler
    seed: int = 0
    dry_run: bool = False

    def read_pairs(self, name: str) -> List[AlignedPair]:
        return pairs_from_frame(self.store.read_csv(name, dtype={"image_path": str}))

    def read_images(self) -> ImageManifest:
        if not self.store.exists(IMAGES_CSV):
            raise DataError(f"{self.store.path(IMAGES_CSV)} does not exist; run process first")
        return ImageManifest.read_csv(self.store.path(IMAGES_CSV))

    def frames(self, refs: Sequence[str]) -> TensorDirectory:
        return self.store.tensors(refs)


Handler = Callable[[CommandContext, argparse.Namespace], Awaitable[None]]


def register_all(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]") -> None:
    from . import data, models

    data.register(subparsers)
    models.register(subparsers)


def csv_floats(raw: Optional[str]) -> tuple[float, ...]:
    if not raw:
        return ()
    try:
        return tuple(float(item) for item in raw.split(",") if item.strip())
    except ValueError as exc:
        raise CommandError(f"expected comma-separated numbers, got '{raw}'") from exc


__all__ = [
    "CommandContext",
    "CommandError",
    "Handler",
    "csv_floats",
    "register_all",
]
