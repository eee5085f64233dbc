"""Learning-rate decay, weight averaging and the training-schedule schema."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Final, Mapping, Sequence

import numpy as np

from ..errors import ConfigError, DataError, ShapeError

DECAY_FRACTION: Final[float] = 0.75
DECAY_FACTOR: Final[float] = 0.1
OPTIMIZERS: Final = frozenset({"sgd", "adam", "adamw"})
WEIGHT_INITS: Final = frozenset({"pytorch", "random"})


@dataclass(frozen=True, slots=True)
class TrainingSchedule:
    """Per-epoch schedule; optimizer, init, weight decay and dropout are kept for external estimators."""

    lr0: float = 1e-3
    n_epochs: int = 16
    batch: int = 64
    optimizer: str = "adamw"
    weight_init: str = "pytorch"
    weight_decay: float = 0.0
    dropout: float = 0.0

    def __post_init__(self) -> None:
        if not self.lr0 > 0:
            raise ConfigError("lr0 must be > 0")
        if self.n_epochs < 4:
            raise ConfigError("n_epochs must be >= 4")
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {sorted(OPTIMIZERS)}")
        if self.weight_init not in WEIGHT_INITS:
            raise ConfigError(f"weight_init must be one of {sorted(WEIGHT_INITS)}")
        if not 0.0 <= self.weight_decay <= 1e-3:
            raise ConfigError("weight_decay must be within [0, 1e-3]")
        if not 0.0 <= self.dropout <= 0.7:
            raise ConfigError("dropout must be within [0, 0.7]")

    @property
    def averaging_start(self) -> int:
        return math.ceil(DECAY_FRACTION * self.n_epochs)

    @classmethod
    def from_mapping(cls, payload: Mapping[str, Any]) -> "TrainingSchedule":
        allowed = {"lr0", "n_epochs", "batch", "optimizer", "weight_init", "weight_decay", "dropout"}
        unknown = set(payload) - allowed
        if unknown:
            raise ConfigError(f"Unknown training keys: {', '.join(sorted(unknown))}")
        try:
            return cls(
                lr0=float(payload.get("lr0", 1e-3)),
                n_epochs=int(payload.get("n_epochs", 16)),
                batch=int(payload.get("batch", 64)),
                optimizer=str(payload.get("optimizer", "adamw")).lower(),
                weight_init=str(payload.get("weight_init", "pytorch")).lower(),
                weight_decay=float(payload.get("weight_decay", 0.0)),
                dropout=float(payload.get("dropout", 0.0)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("training settings must be numeric where numbers are expected") from exc

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lr0": self.lr0,
            "n_epochs": self.n_epochs,
            "batch": self.batch,
            "optimizer": self.optimizer,
            "weight_init": self.weight_init,
            "weight_decay": self.weight_decay,
            "dropout": self.dropout,
        }


def lr_at(schedule: TrainingSchedule, epoch: int) -> float:
    """Geometric decay to ``lr0/10`` over the first 75% of epochs, flat afterwards."""

    if not 0 <= epoch <= schedule.n_epochs:
        raise ConfigError(f"epoch {epoch} outside [0, {schedule.n_epochs}]")
    progress = min(epoch / (DECAY_FRACTION * schedule.n_epochs), 1.0)
    return schedule.lr0 * math.exp(math.log(DECAY_FACTOR) * progress)


def average_weights(snapshots: Sequence[np.ndarray]) -> np.ndarray:
    if not snapshots:
        raise DataError("average_weights needs at least one snapshot")
    first = np.asarray(snapshots[0], dtype=float)
    for snapshot in snapshots[1:]:
        if np.shape(snapshot) != first.shape:
            raise ShapeError(f"snapshot shape {np.shape(snapshot)} differs from {first.shape}")
    return np.mean(np.stack([np.asarray(s, dtype=float) for s in snapshots]), axis=0)


__all__ = ["TrainingSchedule", "average_weights", "lr_at"]
