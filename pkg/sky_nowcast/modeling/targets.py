"""Target variables (GHI, clear-sky index, clearness index) and the target-space loss."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Sequence

import numpy as np

from ..alignment import AlignedPair
from ..errors import ConfigError, DataError, ShapeError
from ..solar.clearsky import ClearSkyContext


class UndefinedTargetError(DataError):
    """Raised when a normalised target is requested against a zero normaliser."""


class TargetVariable(str, Enum):
    GHI = "ghi"
    KT_CLEAR = "kt"
    KT_CLEARNESS = "Kt"


@dataclass(frozen=True, slots=True)
class TargetKind:
    kind: TargetVariable = TargetVariable.KT_CLEAR
    weighted: bool = False

    def __post_init__(self) -> None:
        if self.weighted and self.kind is TargetVariable.GHI:
            raise ConfigError("a weighted loss needs a normalised target (kt or Kt)")

    @classmethod
    def parse(cls, label: str) -> "TargetKind":
        """Accept ``ghi``, ``kt``, ``Kt`` with an optional ``_w`` suffix for the weighted loss."""

        raw = label.strip()
        weighted = raw.endswith("_w")
        if weighted:
            raw = raw[:-2]
        lowered = raw.lower()
        if lowered == "ghi":
            return cls(TargetVariable.GHI, weighted)
        if raw == "kt" or lowered == "kt_clear":
            return cls(TargetVariable.KT_CLEAR, weighted)
        if raw == "Kt" or lowered == "kt_clearness":
            return cls(TargetVariable.KT_CLEARNESS, weighted)
        raise ConfigError(f"Unknown target '{label}'; expected ghi, kt, Kt, kt_w or Kt_w")

    @property
    def label(self) -> str:
        return self.kind.value + ("_w" if self.weighted else "")

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "weighted": self.weighted}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "TargetKind":
        try:
            return cls(TargetVariable(payload["kind"]), bool(payload.get("weighted", False)))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid target definition {payload!r}") from exc


def normalizer(ctx: ClearSkyContext, kind: TargetKind) -> float:
    if kind.kind is TargetVariable.GHI:
        return 1.0
    value = ctx.i_clr if kind.kind is TargetVariable.KT_CLEAR else ctx.i_extr
    if value <= 0:
        raise UndefinedTargetError(f"{kind.kind.value} is undefined for a zero normaliser")
    return value


def normalizers(contexts: Sequence[ClearSkyContext], kind: TargetKind) -> np.ndarray:
    if kind.kind is TargetVariable.GHI:
        return np.ones(len(contexts))
    attr = "i_clr" if kind.kind is TargetVariable.KT_CLEAR else "i_extr"
    values = np.array([getattr(ctx, attr) for ctx in contexts], dtype=float)
    if np.any(values <= 0):
        raise UndefinedTargetError(f"{kind.kind.value} is undefined for a zero normaliser")
    return values


def to_target(pair: AlignedPair, kind: TargetKind) -> float:
    return pair.label_ghi / normalizer(pair.ctx, kind)


def from_target(y_hat: float, ctx: ClearSkyContext, kind: TargetKind) -> float:
    return y_hat * normalizer(ctx, kind)


def targets(pairs: Sequence[AlignedPair], kind: TargetKind) -> np.ndarray:
    ghi = np.array([pair.label_ghi for pair in pairs], dtype=float)
    return ghi / normalizers([pair.ctx for pair in pairs], kind)


def loss(
    y: np.ndarray,
    y_hat: np.ndarray,
    contexts: Sequence[ClearSkyContext],
    kind: TargetKind,
) -> float:
    """Mean squared error in target space; the weighted form rescales residuals back to W/m²."""

    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.size == 0:
        raise DataError("loss needs a non-empty batch")
    if y.shape != y_hat.shape or len(contexts) != y.size:
        raise ShapeError("loss inputs must have matching lengths")
    residual = y - y_hat
    if kind.weighted:
        residual = residual * normalizers(contexts, kind)
    return float(np.mean(residual**2))


__all__ = [
    "TargetKind",
    "TargetVariable",
    "UndefinedTargetError",
    "from_target",
    "loss",
    "normalizer",
    "normalizers",
    "targets",
    "to_target",
]
