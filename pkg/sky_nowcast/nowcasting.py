"""Forecast sequences, smart persistence and the two-step / single-step nowcasting harnesses."""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Final, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .alignment import AlignedPair, local_day
from .errors import DataError, ShapeError
from .imaging.image import resize_box
from .imaging.tensor import read_tensor
from .irradiance.series import format_timestamps, parse_timestamps
from .modeling.estimators import Estimator, FrameBatch
from .solar.clearsky import ClearSkyContext
from .solar.geometry import Site

_LOGGER = logging.getLogger(__name__)

LEAD_MINUTES: Final[Tuple[int, ...]] = (2, 4, 6, 8, 10)
CONTEXT_OFFSETS: Final[Tuple[int, ...]] = (-8, -6, -4, -2, 0)
_NS_PER_S: Final[int] = 1_000_000_000


@dataclass(frozen=True, slots=True)
class SequenceSample:
    """Five context pairs at t−8..t and five target pairs at t+2..t+10 minutes."""

    t: pd.Timestamp
    context: Tuple[AlignedPair, ...]
    targets: Tuple[AlignedPair, ...]

    def __post_init__(self) -> None:
        if len(self.context) != len(CONTEXT_OFFSETS) or len(self.targets) != len(LEAD_MINUTES):
            raise ShapeError("a sequence sample needs 5 context and 5 target pairs")

    @property
    def now(self) -> AlignedPair:
        return self.context[-1]

    @property
    def kt_now(self) -> float:
        ctx = self.now.ctx
        return self.now.label_ghi / ctx.i_clr if ctx.i_clr > 0 else float("nan")

    @property
    def target_ghi(self) -> np.ndarray:
        return np.array([pair.label_ghi for pair in self.targets], dtype=float)

    @property
    def target_kt(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            clr = np.array([pair.ctx.i_clr for pair in self.targets], dtype=float)
            return np.where(clr > 0, self.target_ghi / clr, np.nan)

    @property
    def target_contexts(self) -> Tuple[ClearSkyContext, ...]:
        return tuple(pair.ctx for pair in self.targets)


def _lookup(stamps: np.ndarray, wanted: np.ndarray, tolerance_ns: int) -> np.ndarray:
    """Index of the nearest stamp within tolerance for each wanted instant, ``-1`` where none."""

    if stamps.size == 0:
        return np.full(wanted.shape, -1)
    right = np.clip(np.searchsorted(stamps, wanted), 0, stamps.size - 1)
    left = np.clip(right - 1, 0, stamps.size - 1)
    nearest = np.where(np.abs(stamps[left] - wanted) <= np.abs(stamps[right] - wanted), left, right)
    return np.where(np.abs(stamps[nearest] - wanted) <= tolerance_ns, nearest, -1)


def build_sequences(
    pairs: Sequence[AlignedPair],
    site: Site,
    *,
    frames: Optional[Mapping[str, np.ndarray]] = None,
    odd_days_only: bool = False,
    tolerance_s: float = 0.0,
) -> List[SequenceSample]:
    """Sliding windows over the pairs whose ten instants all carry a label (and a frame, when given)."""

    ordered = sorted(pairs, key=lambda pair: (pair.instant, pair.image_ref))
    if frames is not None:
        ordered = [pair for pair in ordered if pair.image_ref in frames]
    stamps = np.array([pair.instant.value for pair in ordered], dtype=np.int64)
    # one pair per instant; the earliest ref wins on duplicates
    stamps, first = np.unique(stamps, return_index=True)
    ordered = [ordered[k] for k in first]
    offsets_min = np.array(CONTEXT_OFFSETS + LEAD_MINUTES, dtype=np.int64)
    tolerance_ns = int(round(tolerance_s * _NS_PER_S))

    samples: List[SequenceSample] = []
    skipped = 0
    for anchor, pair in enumerate(ordered):
        if odd_days_only and local_day(pair.instant, site).day % 2 == 0:
            continue
        wanted = stamps[anchor] + offsets_min * 60 * _NS_PER_S
        found = _lookup(stamps, wanted, tolerance_ns)
        if np.any(found < 0):
            skipped += 1
            continue
        members = [ordered[int(k)] for k in found]
        samples.append(
            SequenceSample(
                t=pair.instant,
                context=tuple(members[: len(CONTEXT_OFFSETS)]),
                targets=tuple(members[len(CONTEXT_OFFSETS) :]),
            )
        )
    _LOGGER.info("Built %d sequence samples; %d anchors lacked a complete window", len(samples), skipped)
    return samples


def smart_persistence(kt_now: float, clr_future: Sequence[ClearSkyContext]) -> np.ndarray:
    """``Î(t+h) = kt_now · I_clr(t+h)`` for each lead."""

    if not np.isfinite(kt_now):
        raise DataError("smart persistence needs a finite clear-sky index at t")
    return kt_now * np.array([ctx.i_clr for ctx in clr_future], dtype=float)


def _frames_for(refs: Sequence[str], frames: Mapping[str, np.ndarray]) -> np.ndarray:
    try:
        return np.stack([frames[ref] for ref in refs])
    except KeyError as exc:
        raise DataError(f"no frame stored for image {exc.args[0]!r}") from exc


class VideoPredictor(ABC):
    """Predicts the five future frames of a sample from its context; implementations must be read-only."""

    name: str = "video"

    @abstractmethod
    def predict(self, sample: SequenceSample, frames: Mapping[str, np.ndarray]) -> np.ndarray:
        """Return a 5×H×W×C ``uint8`` stack, one frame per lead."""


class FrozenPersistence(VideoPredictor):
    name = "frozen"

    def predict(self, sample: SequenceSample, frames: Mapping[str, np.ndarray]) -> np.ndarray:
        current = _frames_for([sample.now.image_ref], frames)
        return np.repeat(current, len(LEAD_MINUTES), axis=0)


class GroundTruthPassthrough(VideoPredictor):
    """Returns the real future frames; bounds what a perfect video model could achieve."""

    name = "ground-truth"

    def predict(self, sample: SequenceSample, frames: Mapping[str, np.ndarray]) -> np.ndarray:
        return _frames_for([pair.image_ref for pair in sample.targets], frames)


class ExternalPredictor(VideoPredictor):
    """Frames produced by an outside video model, listed in a CSV of ``sample_t, lead_min, path``."""

    name = "external"

    def __init__(self, frame_paths: Mapping[Tuple[pd.Timestamp, int], Path]) -> None:
        self._paths = dict(frame_paths)

    @classmethod
    def read_csv(cls, path: Path | str) -> "ExternalPredictor":
        listing = Path(path)
        frame = pd.read_csv(listing, dtype={"sample_t": str, "path": str})
        missing = {"sample_t", "lead_min", "path"} - set(frame.columns)
        if missing:
            raise DataError(f"{listing}: predicted-frame listing lacks columns {', '.join(sorted(missing))}")
        stamps = parse_timestamps(frame["sample_t"])
        paths = {
            (stamp, int(lead)): (listing.parent / rel)
            for stamp, lead, rel in zip(stamps, frame["lead_min"], frame["path"])
        }
        return cls(paths)

    def predict(self, sample: SequenceSample, frames: Mapping[str, np.ndarray]) -> np.ndarray:
        stack = []
        for lead in LEAD_MINUTES:
            path = self._paths.get((sample.t, lead))
            if path is None:
                raise DataError(f"no predicted frame for {sample.t} at +{lead} min")
            stack.append(read_tensor(path))
        return np.stack(stack)


def two_step_forecast(
    sample: SequenceSample,
    vp: VideoPredictor,
    est: Estimator,
    frames: Mapping[str, np.ndarray],
    out_w: Optional[int] = None,
) -> np.ndarray:
    """Predict future frames, then estimate GHI on each one with its own instant's clear-sky context."""

    predicted = np.asarray(vp.predict(sample, frames))
    reference = _frames_for([sample.now.image_ref], frames)[0]
    if predicted.ndim != 4 or predicted.shape[0] != len(LEAD_MINUTES):
        raise ShapeError(f"video predictor returned {predicted.shape}; expected 5×H×W×C")
    if predicted.shape[3] != reference.shape[2]:
        raise ShapeError(f"predicted frames have {predicted.shape[3]} channels, estimator expects {reference.shape[2]}")
    width = reference.shape[1] if out_w is None else out_w
    if predicted.shape[1:3] != (width, width):
        predicted = np.stack([resize_box(frame, width) for frame in predicted])
    batch = FrameBatch(
        refs=tuple(pair.image_ref for pair in sample.targets),
        frames=predicted,
        positions=tuple(pair.position for pair in sample.targets),
    )
    return est.estimate(batch, sample.target_contexts)


class SingleStepForecaster(ABC):
    """Maps a sample's context straight to five future clear-sky indices."""

    name: str = "single-step"

    @abstractmethod
    def forecast_kt(self, sample: SequenceSample, frames: Mapping[str, np.ndarray]) -> np.ndarray:
        """Five kt values, one per lead."""

    def forecast(self, sample: SequenceSample, frames: Mapping[str, np.ndarray]) -> np.ndarray:
        kt = np.asarray(self.forecast_kt(sample, frames), dtype=float)
        if kt.shape != (len(LEAD_MINUTES),):
            raise ShapeError(f"single-step forecaster returned {kt.shape}; expected 5 values")
        return kt * np.array([ctx.i_clr for ctx in sample.target_contexts], dtype=float)


class PersistKt(SingleStepForecaster):
    name = "persist-kt"

    def forecast_kt(self, sample: SequenceSample, frames: Mapping[str, np.ndarray]) -> np.ndarray:
        return np.full(len(LEAD_MINUTES), sample.kt_now)


def truth_matrix(samples: Sequence[SequenceSample]) -> np.ndarray:
    return np.array([sample.target_ghi for sample in samples], dtype=float).reshape(len(samples), len(LEAD_MINUTES))


def run_spm(samples: Sequence[SequenceSample]) -> np.ndarray:
    rows = [smart_persistence(sample.kt_now, sample.target_contexts) for sample in samples]
    return np.array(rows, dtype=float).reshape(len(samples), len(LEAD_MINUTES))


def run_two_step(
    samples: Sequence[SequenceSample],
    vp: VideoPredictor,
    est: Estimator,
    frames: Mapping[str, np.ndarray],
    out_w: Optional[int] = None,
) -> np.ndarray:
    rows = [two_step_forecast(sample, vp, est, frames, out_w) for sample in samples]
    return np.array(rows, dtype=float).reshape(len(samples), len(LEAD_MINUTES))


def run_single_step(
    samples: Sequence[SequenceSample], forecaster: SingleStepForecaster, frames: Mapping[str, np.ndarray]
) -> np.ndarray:
    rows = [forecaster.forecast(sample, frames) for sample in samples]
    return np.array(rows, dtype=float).reshape(len(samples), len(LEAD_MINUTES))


@dataclass(frozen=True, slots=True)
class LeadScore:
    lead_min: int
    rmse: float
    rmse_spm: float
    fs: float
    n: int


@dataclass(frozen=True, slots=True)
class ForecastReport:
    leads: Tuple[LeadScore, ...]
    model: str = ""

    def by_lead(self) -> Dict[int, LeadScore]:
        return {score.lead_min: score for score in self.leads}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {"lead_min": s.lead_min, "rmse": s.rmse, "fs": s.fs, "n": s.n, "rmse_spm": s.rmse_spm}
                for s in self.leads
            ],
            columns=["lead_min", "rmse", "fs", "n", "rmse_spm"],
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model,
            "leads": [
                {"lead_min": s.lead_min, "rmse": s.rmse, "rmse_spm": s.rmse_spm, "fs": s.fs, "n": s.n}
                for s in self.leads
            ],
        }


def _rmse(truth: np.ndarray, pred: np.ndarray) -> float:
    return float(np.sqrt(np.mean((truth - pred) ** 2)))


def _skill(rmse: float, rmse_spm: float) -> float:
    if rmse == rmse_spm:
        return 0.0
    if rmse_spm > 0:
        return 1.0 - rmse / rmse_spm
    return float("nan")


def target_instants(samples: Sequence[SequenceSample]) -> np.ndarray:
    """N×5 matrix of target instants in epoch nanoseconds."""

    stamps = [[pair.instant.value for pair in sample.targets] for sample in samples]
    return np.array(stamps, dtype=np.int64).reshape(len(samples), len(LEAD_MINUTES))


def _shared_targets(instants: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Mask of cells whose target instant is scored at every lead."""

    per_lead = [np.unique(instants[valid[:, column], column]) for column in range(instants.shape[1])]
    shared = per_lead[0]
    for stamps in per_lead[1:]:
        shared = np.intersect1d(shared, stamps, assume_unique=True)
    return valid & np.isin(instants, shared)


def evaluate_forecasts(
    truth: np.ndarray,
    forecasts: np.ndarray,
    baseline: np.ndarray,
    *,
    model: str = "",
    instants: Optional[np.ndarray] = None,
) -> ForecastReport:
    """Per-lead RMSE and skill ``1 − RMSE/RMSE_SPM``; leads with no finite samples are omitted.

    With ``instants`` (see :func:`target_instants`) every lead is scored on the same set of
    target instants, in instant order.
    """

    truth = np.asarray(truth, dtype=float)
    forecasts = np.asarray(forecasts, dtype=float)
    baseline = np.asarray(baseline, dtype=float)
    if not truth.shape == forecasts.shape == baseline.shape:
        raise ShapeError("truth, forecast and baseline matrices must share one shape")
    if truth.ndim != 2 or truth.shape[1] != len(LEAD_MINUTES):
        raise ShapeError(f"forecast matrices must be N×{len(LEAD_MINUTES)}, got {truth.shape}")
    valid = np.isfinite(truth) & np.isfinite(forecasts) & np.isfinite(baseline)
    order = np.tile(np.arange(truth.shape[0]), (len(LEAD_MINUTES), 1)).T
    if instants is not None:
        instants = np.asarray(instants, dtype=np.int64)
        if instants.shape != truth.shape:
            raise ShapeError(f"target instants must be {truth.shape}, got {instants.shape}")
        valid = _shared_targets(instants, valid)
        order = np.argsort(instants, axis=0, kind="stable")
    scores = []
    for column, lead in enumerate(LEAD_MINUTES):
        rows = order[:, column][valid[order[:, column], column]]
        if rows.size == 0:
            continue
        rmse = _rmse(truth[rows, column], forecasts[rows, column])
        rmse_spm = _rmse(truth[rows, column], baseline[rows, column])
        scores.append(
            LeadScore(lead_min=lead, rmse=rmse, rmse_spm=rmse_spm, fs=_skill(rmse, rmse_spm), n=int(rows.size))
        )
    return ForecastReport(leads=tuple(scores), model=model)


def forecasts_to_frame(samples: Sequence[SequenceSample], forecasts: np.ndarray) -> pd.DataFrame:
    """Long table ``sample_t, lead_min, ghi_true, ghi_hat``."""

    rows: Dict[str, List[Any]] = {"sample_t": [], "lead_min": [], "ghi_true": [], "ghi_hat": []}
    stamps = format_timestamps(pd.DatetimeIndex([sample.t for sample in samples])) if samples else []
    for stamp, sample, row in zip(stamps, samples, np.asarray(forecasts, dtype=float)):
        for lead, truth, value in zip(LEAD_MINUTES, sample.target_ghi, row):
            rows["sample_t"].append(stamp)
            rows["lead_min"].append(lead)
            rows["ghi_true"].append(float(truth))
            rows["ghi_hat"].append(float(value))
    return pd.DataFrame(rows)


__all__ = [
    "CONTEXT_OFFSETS",
    "ExternalPredictor",
    "ForecastReport",
    "FrozenPersistence",
    "GroundTruthPassthrough",
    "LEAD_MINUTES",
    "LeadScore",
    "PersistKt",
    "SequenceSample",
    "SingleStepForecaster",
    "VideoPredictor",
    "build_sequences",
    "evaluate_forecasts",
    "forecasts_to_frame",
    "run_single_step",
    "run_spm",
    "run_two_step",
    "smart_persistence",
    "target_instants",
    "truth_matrix",
    "two_step_forecast",
]
