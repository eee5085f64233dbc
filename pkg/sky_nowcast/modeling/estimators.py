"""Image-to-irradiance estimators: closed-form ridge, linear SGD and externally produced predictions."""

from __future__ import annotations

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.linear_model import Ridge

from ..alignment import AlignedPair
from ..errors import ConfigError, DataError, ShapeError
from ..imaging.sunmask import CameraModel, render_sun_mask
from ..solar.clearsky import ClearSkyContext
from ..solar.geometry import SolarPosition
from .schedule import TrainingSchedule, average_weights, lr_at
from .targets import TargetKind, normalizers, targets

_LOGGER = logging.getLogger(__name__)


class NumericalError(DataError):
    """Raised when a fit is numerically impossible as configured."""


@dataclass(frozen=True, slots=True)
class FeatureSpec:
    """Flattened, block-pooled RGB (+ optional sun-mask) features plus an optional cosθz term."""

    pool_width: int = 16
    include_mask: bool = False
    include_cos_zenith: bool = True
    camera: Optional[CameraModel] = None

    def __post_init__(self) -> None:
        if self.pool_width < 1:
            raise ConfigError("feature pool width must be >= 1")

    @property
    def dimension(self) -> int:
        planes = 3 + (1 if self.include_mask else 0)
        return planes * self.pool_width**2 + (1 if self.include_cos_zenith else 0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pool_width": self.pool_width,
            "include_mask": self.include_mask,
            "include_cos_zenith": self.include_cos_zenith,
            "camera": None if self.camera is None else {**self.camera.to_dict(), "width": self.camera.width},
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "FeatureSpec":
        camera_payload = payload.get("camera")
        camera = None
        if camera_payload:
            camera_payload = dict(camera_payload)
            width = int(camera_payload.pop("width", 64))
            camera = CameraModel.from_mapping(camera_payload, width=width)
        return cls(
            pool_width=int(payload.get("pool_width", 16)),
            include_mask=bool(payload.get("include_mask", False)),
            include_cos_zenith=bool(payload.get("include_cos_zenith", True)),
            camera=camera,
        )


@dataclass(frozen=True, slots=True)
class FrameBatch:
    """Frames (N×H×W×C ``uint8``) with the solar position at each frame's instant."""

    refs: Tuple[str, ...]
    frames: np.ndarray
    positions: Tuple[SolarPosition, ...]

    def __post_init__(self) -> None:
        if self.frames.ndim != 4:
            raise ShapeError(f"frame batch must be N×H×W×C, got {self.frames.shape}")
        if not len(self.refs) == len(self.positions) == self.frames.shape[0]:
            raise ShapeError("frame batch refs, frames and positions must have equal lengths")

    def __len__(self) -> int:
        return len(self.refs)

    @classmethod
    def from_pairs(cls, pairs: Sequence[AlignedPair], frames: Mapping[str, np.ndarray]) -> "FrameBatch":
        try:
            stack = np.stack([frames[pair.image_ref] for pair in pairs]) if pairs else np.zeros((0, 1, 1, 3), np.uint8)
        except KeyError as exc:
            raise DataError(f"no frame stored for image {exc.args[0]!r}") from exc
        return cls(
            refs=tuple(pair.image_ref for pair in pairs),
            frames=stack,
            positions=tuple(pair.position for pair in pairs),
        )


def _pool(planes: np.ndarray, width: int) -> np.ndarray:
    """Block-average N×H×W×P planes to N×width×width×P."""

    n, height, frame_width, depth = planes.shape
    if height != frame_width or height % width:
        raise ShapeError(f"{height}×{frame_width} frames cannot be pooled to {width}×{width}")
    factor = height // width
    return planes.reshape(n, width, factor, width, factor, depth).mean(axis=(2, 4))


def design_matrix(batch: FrameBatch, spec: FeatureSpec) -> np.ndarray:
    frames = batch.frames
    if frames.shape[0] == 0:
        return np.zeros((0, spec.dimension))
    planes = [frames[..., :3].astype(np.float64) / 255.0]
    if spec.include_mask:
        if frames.shape[3] >= 4:
            mask = frames[..., 3:4].astype(np.float64) / 255.0
        elif spec.camera is not None:
            mask = np.stack(
                [render_sun_mask(spec.camera, pos).mask.astype(np.float64) for pos in batch.positions]
            )[..., np.newaxis]
            if mask.shape[1:3] != frames.shape[1:3]:
                raise ShapeError("camera width does not match the frame width")
        else:
            raise ConfigError("mask features need 4-channel frames or a camera model")
        planes.append(mask)
    pooled = _pool(np.concatenate(planes, axis=3), spec.pool_width)
    columns = [pooled.reshape(len(batch), -1)]
    if spec.include_cos_zenith:
        zenith = np.array([pos.zenith for pos in batch.positions], dtype=float)
        columns.append(np.cos(np.radians(zenith))[:, np.newaxis])
    return np.concatenate(columns, axis=1)


class Estimator(ABC):
    """Maps frames to a target value; :meth:`estimate` turns that into W/m²."""

    target: TargetKind

    @abstractmethod
    def predict_target(self, batch: FrameBatch) -> np.ndarray:
        """Target-space predictions, one per frame."""

    def estimate(self, batch: FrameBatch, contexts: Sequence[ClearSkyContext]) -> np.ndarray:
        if len(contexts) != len(batch):
            raise ShapeError("one clear-sky context is needed per frame")
        return self.predict_target(batch) * normalizers(contexts, self.target)

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """JSON-serialisable parameters."""


@dataclass(slots=True)
class LinearEstimator(Estimator):
    target: TargetKind
    features: FeatureSpec
    weights: np.ndarray
    intercept: float
    kind: str = "ridge"
    details: Dict[str, Any] = field(default_factory=dict)

    def predict_target(self, batch: FrameBatch) -> np.ndarray:
        design = design_matrix(batch, self.features)
        if design.shape[1] != self.weights.shape[0]:
            raise ShapeError(f"{design.shape[1]} features do not match {self.weights.shape[0]} weights")
        return design @ self.weights + self.intercept

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "target": self.target.to_dict(),
            "features": self.features.to_dict(),
            "weights": [float(w) for w in self.weights],
            "intercept": float(self.intercept),
            "details": dict(self.details),
        }


@dataclass(slots=True)
class ExternalEstimator(Estimator):
    """Predictions produced outside this package from the exported tensors, keyed by image path."""

    target: TargetKind
    predictions: Mapping[str, float]
    source: str = ""

    def predict_target(self, batch: FrameBatch) -> np.ndarray:
        try:
            return np.array([self.predictions[ref] for ref in batch.refs], dtype=float)
        except KeyError as exc:
            raise DataError(f"external predictions lack image {exc.args[0]!r}") from exc

    @classmethod
    def read_csv(cls, path: Path | str, target: TargetKind) -> "ExternalEstimator":
        frame = pd.read_csv(path)
        if not {"image_path", "y_hat"} <= set(frame.columns):
            raise DataError(f"{path}: external predictions need 'image_path' and 'y_hat' columns")
        predictions = dict(zip(frame["image_path"].astype(str), frame["y_hat"].astype(float)))
        return cls(target=target, predictions=predictions, source=str(path))

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "external", "target": self.target.to_dict(), "source": self.source}


def _training_arrays(
    pairs: Sequence[AlignedPair], frames: Mapping[str, np.ndarray], kind: TargetKind, spec: FeatureSpec
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    if not pairs:
        raise DataError("cannot fit an estimator on zero pairs")
    design = design_matrix(FrameBatch.from_pairs(pairs, frames), spec)
    y = targets(pairs, kind)
    weights = normalizers([pair.ctx for pair in pairs], kind) ** 2 if kind.weighted else None
    return design, y, weights


def fit_ridge_arrays(
    design: np.ndarray,
    y: np.ndarray,
    alpha: float,
    sample_weight: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, float]:
    """Closed-form ridge with an unpenalised intercept."""

    if alpha < 0:
        raise ConfigError("ridge alpha must be >= 0")
    if alpha == 0:
        weights = np.ones(len(y)) if sample_weight is None else sample_weight
        centred = design - np.average(design, axis=0, weights=weights)
        if np.linalg.matrix_rank(centred * np.sqrt(weights)[:, np.newaxis]) < design.shape[1]:
            raise NumericalError("normal matrix is singular with alpha=0; use alpha > 0")
    model = Ridge(alpha=alpha, solver="cholesky", fit_intercept=True)
    model.fit(design, y, sample_weight=sample_weight)
    return np.asarray(model.coef_, dtype=float), float(model.intercept_)


def fit_ridge(
    pairs: Sequence[AlignedPair],
    frames: Mapping[str, np.ndarray],
    kind: TargetKind,
    alpha: float,
    spec: FeatureSpec = FeatureSpec(),
) -> LinearEstimator:
    design, y, sample_weight = _training_arrays(pairs, frames, kind, spec)
    weights, intercept = fit_ridge_arrays(design, y, alpha, sample_weight)
    _LOGGER.info("Ridge fit on %d pairs, %d features, target %s", len(pairs), design.shape[1], kind.label)
    return LinearEstimator(
        target=kind, features=spec, weights=weights, intercept=intercept, kind="ridge", details={"alpha": alpha}
    )


def sgd_arrays(
    design: np.ndarray,
    y: np.ndarray,
    schedule: TrainingSchedule,
    alpha: float = 0.0,
    sample_weight: Optional[np.ndarray] = None,
    seed: int = 0,
) -> Tuple[np.ndarray, float]:
    """Mini-batch SGD on the same objective as :func:`fit_ridge_arrays`, scaled by ``1/n``.

    The rate follows :func:`lr_at` per epoch; end-of-epoch snapshots from
    ``schedule.averaging_start`` on are averaged into the returned parameters.
    """

    n, dim = design.shape
    if n == 0:
        raise DataError("cannot fit on zero rows")
    rng = np.random.default_rng(seed)
    sample_weight = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    params = np.zeros(dim + 1)
    augmented = np.hstack([design, np.ones((n, 1))])
    penalty = np.full(dim + 1, 2.0 * alpha / n)
    penalty[-1] = 0.0
    snapshots = []
    for epoch in range(schedule.n_epochs):
        rate = lr_at(schedule, epoch)
        order = rng.permutation(n)
        for start in range(0, n, schedule.batch):
            rows = order[start : start + schedule.batch]
            residual = augmented[rows] @ params - y[rows]
            gradient = 2.0 * (augmented[rows].T @ (sample_weight[rows] * residual)) / len(rows)
            params -= rate * (gradient + penalty * params)
        if epoch + 1 > schedule.averaging_start:
            snapshots.append(params.copy())
    final = average_weights(snapshots) if snapshots else params
    return final[:-1], float(final[-1])


def fit_linear_sgd(
    pairs: Sequence[AlignedPair],
    frames: Mapping[str, np.ndarray],
    kind: TargetKind,
    schedule: TrainingSchedule,
    alpha: float = 0.0,
    spec: FeatureSpec = FeatureSpec(),
    seed: int = 0,
) -> LinearEstimator:
    design, y, sample_weight = _training_arrays(pairs, frames, kind, spec)
    weights, intercept = sgd_arrays(design, y, schedule, alpha, sample_weight, seed)
    return LinearEstimator(
        target=kind,
        features=spec,
        weights=weights,
        intercept=intercept,
        kind="linear_sgd",
        details={"alpha": alpha, "schedule": schedule.to_dict(), "seed": seed},
    )


def estimator_from_dict(payload: Mapping[str, Any]) -> Estimator:
    kind = payload.get("kind")
    target = TargetKind.from_dict(payload.get("target", {}))
    if kind in {"ridge", "linear_sgd"}:
        return LinearEstimator(
            target=target,
            features=FeatureSpec.from_dict(payload.get("features", {})),
            weights=np.asarray(payload["weights"], dtype=float),
            intercept=float(payload["intercept"]),
            kind=str(kind),
            details=dict(payload.get("details", {})),
        )
    if kind == "external":
        return ExternalEstimator.read_csv(payload["source"], target)
    raise ConfigError(f"Unknown estimator kind {kind!r}")


def save_estimator(estimator: Estimator, path: Path | str) -> None:
    target = Path(path)
    tmp_path = target.with_suffix(".tmp")
    tmp_path.write_text(json.dumps(estimator.to_dict(), indent=2, sort_keys=True))
    tmp_path.replace(target)


def load_estimator(path: Path | str) -> Estimator:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: unreadable estimator ({exc})") from exc
    return estimator_from_dict(payload)


__all__ = [
    "Estimator",
    "ExternalEstimator",
    "FeatureSpec",
    "FrameBatch",
    "LinearEstimator",
    "NumericalError",
    "design_matrix",
    "estimator_from_dict",
    "fit_linear_sgd",
    "fit_ridge",
    "fit_ridge_arrays",
    "load_estimator",
    "save_estimator",
    "sgd_arrays",
]
