"""Label preparation: 1-second interpolation, zenith filtering, sensor fusion and time shifting.

The only accepted stage order for training labels is shift, then interpolation, then the
zenith filter. :func:`label_series` runs that order; the individual stages refuse to run out
of order where it matters.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Final, Optional, Sequence

import numpy as np
import pandas as pd

from ..errors import ConfigError, DataError
from ..solar.geometry import Site, SolarPosition, solar_position_frame
from .series import COMPONENTS, TIMESTAMP_COLUMN, IrradianceSeries, infer_interval

_LOGGER = logging.getLogger(__name__)

MAX_TIME_SHIFT_S: Final[float] = 300.0
DEFAULT_MAX_GAP_S: Final[float] = 60.0
DEFAULT_MAX_ZENITH_DEG: Final[float] = 80.0
DEFAULT_MEDIAN_TOLERANCE: Final[float] = 10.0

STAGE_TIME_SHIFT: Final[str] = "time_shift"
STAGE_INTERPOLATE: Final[str] = "interpolate_1s"
STAGE_ZENITH_FILTER: Final[str] = "zenith_filter"
STAGE_FUSED: Final[str] = "median_fused"
STAGE_DERIVED_DNI: Final[str] = "derived_dni"

_NS_PER_S: Final[int] = 1_000_000_000


class ContractViolationError(DataError):
    """Raised when a stage is asked to do something its role forbids."""


class PipelineOrderError(DataError):
    """Raised when stages run out of the accepted order."""


class SplitRole(str, Enum):
    TRAIN = "train"
    TEST = "test"


class RejectReason(str, Enum):
    MISSING_GHI = "missing_ghi"
    MISSING_DHI = "missing_dhi"
    MISSING_DNI = "missing_dni"
    INCONSISTENT = "inconsistent"


@dataclass(frozen=True, slots=True)
class TimeShift:
    """Label offset in seconds; ``T_new = T + delta_t``."""

    delta_t: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.delta_t) or abs(self.delta_t) > MAX_TIME_SHIFT_S:
            raise ConfigError(f"time shift must be within ±{MAX_TIME_SHIFT_S:.0f}s, got {self.delta_t}")

    @property
    def is_identity(self) -> bool:
        return self.delta_t == 0


@dataclass(frozen=True, slots=True)
class ConsistencyVerdict:
    accepted: bool
    ghi: Optional[float]
    ghi_calculated: Optional[float] = None
    reason: Optional[RejectReason] = None


def _local_days(index_ns: np.ndarray, site: Site) -> np.ndarray:
    local = index_ns // _NS_PER_S + site.utc_offset
    return local // 86_400


def interpolate_1s(series: IrradianceSeries, max_gap: float = DEFAULT_MAX_GAP_S) -> IrradianceSeries:
    """Linearly resample to whole seconds between samples at most ``max_gap`` seconds apart.

    Original samples are kept as they are. Longer gaps emit nothing and their length is
    accounted per site-local day in ``gap_seconds``. Rows without GHI, or carrying a
    rejection reason, count as missing.
    """

    frame = series.frame
    usable = frame["ghi"].notna().to_numpy()
    if "rejected_reason" in frame.columns:
        usable &= frame["rejected_reason"].fillna("").astype(str).eq("").to_numpy()
    frame = frame.loc[usable]

    knots = frame.index.as_unit("ns").asi8
    interpolated_knots = (
        frame["interpolated"].to_numpy(dtype=bool) if "interpolated" in frame.columns else np.zeros(len(frame), bool)
    )
    gap_seconds: Dict[str, float] = {}

    if len(knots) < 2:
        out = frame.loc[:, [c for c in (*COMPONENTS, "clear") if c in frame.columns]].copy()
        out["interpolated"] = interpolated_knots
        return series.with_frame(out, stage=STAGE_INTERPOLATE, native_interval=1.0, gap_seconds=gap_seconds)

    left = knots[:-1]
    right = knots[1:]
    spacing = right - left
    bridged = spacing <= int(round(max_gap * _NS_PER_S))

    gaps = ~bridged
    if gaps.any():
        days = _local_days(left[gaps], series.site)
        lengths = spacing[gaps] / _NS_PER_S
        for day, length in zip(days, lengths):
            key = pd.Timestamp(int(day) * 86_400, unit="s").strftime("%Y-%m-%d")
            gap_seconds[key] = gap_seconds.get(key, 0.0) + float(length)
        for key in sorted({pd.Timestamp(int(day) * 86_400, unit="s").strftime("%Y-%m-%d") for day in days}):
            _LOGGER.info("Dropped %.0f gap seconds on %s", gap_seconds[key], key)

    first = np.floor_divide(left, _NS_PER_S) + 1
    last = -np.floor_divide(-right, _NS_PER_S) - 1
    counts = np.where(bridged, np.maximum(last - first + 1, 0), 0)
    total = int(counts.sum())
    starts = np.repeat(first, counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    fresh = (starts + offsets) * _NS_PER_S

    stamps = np.concatenate([knots, fresh])
    is_fresh = np.concatenate([np.zeros(len(knots), bool), np.ones(total, bool)])
    order = np.argsort(stamps, kind="stable")
    stamps = stamps[order]
    is_fresh = is_fresh[order]

    origin = knots[0]
    x_knots = (knots - origin) / _NS_PER_S
    x_all = (stamps - origin) / _NS_PER_S
    columns: Dict[str, np.ndarray] = {}
    for name in COMPONENTS:
        values = frame[name].to_numpy(dtype=float)
        resampled = np.interp(x_all, x_knots, values)
        # knots keep their own value even next to a missing component
        resampled[~is_fresh] = values
        columns[name] = resampled

    interpolated = np.empty(len(stamps), dtype=bool)
    interpolated[is_fresh] = True
    interpolated[~is_fresh] = interpolated_knots
    columns["interpolated"] = interpolated

    if "clear" in frame.columns:
        clear_knots = frame["clear"].to_numpy(dtype=bool)
        right_pos = np.searchsorted(knots, stamps, side="left")
        right_pos = np.clip(right_pos, 0, len(knots) - 1)
        left_pos = np.clip(right_pos - 1, 0, len(knots) - 1)
        clear = np.where(is_fresh, clear_knots[left_pos] & clear_knots[right_pos], False)
        clear[~is_fresh] = clear_knots
        columns["clear"] = clear

    index = pd.DatetimeIndex(pd.to_datetime(stamps, utc=True)).as_unit("ns")
    index.name = TIMESTAMP_COLUMN
    out = pd.DataFrame(columns, index=index)
    return series.with_frame(out, stage=STAGE_INTERPOLATE, native_interval=1.0, gap_seconds=gap_seconds)


def within_zenith_limit(pos: SolarPosition, max_zenith: float = DEFAULT_MAX_ZENITH_DEG) -> bool:
    return pos.zenith <= max_zenith


def zenith_filter(
    series: IrradianceSeries,
    site: Optional[Site] = None,
    max_zenith: float = DEFAULT_MAX_ZENITH_DEG,
) -> IrradianceSeries:
    """Keep exactly the samples whose apparent zenith is at most ``max_zenith``."""

    site = site or series.site
    zenith = solar_position_frame(site, series.index)["zenith"].to_numpy()
    keep = zenith <= max_zenith
    _LOGGER.debug("Zenith filter kept %d of %d samples", int(keep.sum()), len(keep))
    return series.with_frame(series.frame.loc[keep].copy(), stage=STAGE_ZENITH_FILTER)


def _median(values: Sequence[float]) -> Optional[float]:
    arr = np.asarray([v for v in values if v is not None and np.isfinite(v)], dtype=float)
    if arr.size == 0:
        return None
    return float(np.median(arr))


def median_consistency_filter(
    dhi_set: Sequence[float],
    dni_set: Sequence[float],
    ghi_set: Sequence[float],
    pos: SolarPosition,
    tol: float = DEFAULT_MEDIAN_TOLERANCE,
) -> ConsistencyVerdict:
    """Accept an instant iff ``|M(DNI)·cosθz + M(DHI) − M(GHI)| <= tol``; the label is M(GHI)."""

    ghi = _median(ghi_set)
    dhi = _median(dhi_set)
    dni = _median(dni_set)
    checks = ((ghi, RejectReason.MISSING_GHI), (dhi, RejectReason.MISSING_DHI), (dni, RejectReason.MISSING_DNI))
    for value, reason in checks:
        if value is None:
            return ConsistencyVerdict(accepted=False, ghi=ghi, reason=reason)
    calculated = dni * math.cos(math.radians(pos.zenith)) + dhi
    if abs(calculated - ghi) <= tol:
        return ConsistencyVerdict(accepted=True, ghi=ghi, ghi_calculated=calculated)
    return ConsistencyVerdict(accepted=False, ghi=ghi, ghi_calculated=calculated, reason=RejectReason.INCONSISTENT)


def fuse_sensors(raw: pd.DataFrame, site: Site, tol: float = DEFAULT_MEDIAN_TOLERANCE) -> IrradianceSeries:
    """Vectorised median fusion of a multi-sensor measurement table.

    Every instant is kept; rejected ones carry a ``rejected_reason`` and are skipped by
    :func:`interpolate_1s`.
    """

    grouped = raw.groupby(TIMESTAMP_COLUMN, sort=True)[list(COMPONENTS)].median()
    grouped.index = pd.DatetimeIndex(grouped.index).tz_convert("UTC").as_unit("ns")
    grouped.index.name = TIMESTAMP_COLUMN
    zenith = solar_position_frame(site, grouped.index)["zenith"].to_numpy()
    calculated = grouped["dni"].to_numpy() * np.cos(np.radians(zenith)) + grouped["dhi"].to_numpy()
    reasons = np.full(len(grouped), "", dtype=object)
    reasons[~(np.abs(calculated - grouped["ghi"].to_numpy()) <= tol)] = RejectReason.INCONSISTENT.value
    missing = (("dni", RejectReason.MISSING_DNI), ("dhi", RejectReason.MISSING_DHI), ("ghi", RejectReason.MISSING_GHI))
    for name, reason in missing:
        reasons[grouped[name].isna().to_numpy()] = reason.value
    frame = grouped.copy()
    frame["rejected_reason"] = reasons
    rejected = int((reasons != "").sum())
    _LOGGER.info("Median fusion kept %d of %d instants (tolerance %.1f W/m²)", len(frame) - rejected, len(frame), tol)
    return IrradianceSeries(
        site=site,
        frame=frame,
        native_interval=infer_interval(frame.index),
        stages=(STAGE_FUSED,),
    )


def derive_dni(series: IrradianceSeries, max_zenith: float = DEFAULT_MAX_ZENITH_DEG) -> IrradianceSeries:
    """Back-compute DNI as ``(GHI − DHI)/cosθz``; missing where θz exceeds ``max_zenith``."""

    zenith = solar_position_frame(series.site, series.index)["zenith"].to_numpy()
    frame = series.frame.copy()
    cos_zenith = np.cos(np.radians(zenith))
    valid = zenith <= max_zenith
    dni = np.full(len(frame), np.nan)
    dni[valid] = (frame["ghi"].to_numpy()[valid] - frame["dhi"].to_numpy()[valid]) / cos_zenith[valid]
    frame["dni"] = np.clip(dni, 0.0, None)
    return series.with_frame(frame, stage=STAGE_DERIVED_DNI)


def apply_time_shift(series: IrradianceSeries, shift: TimeShift, role: SplitRole) -> IrradianceSeries:
    if role is SplitRole.TEST:
        if not shift.is_identity:
            raise ContractViolationError("time shifts apply to training labels only")
        return series
    if STAGE_ZENITH_FILTER in series.stages:
        raise PipelineOrderError("time shift must run before the zenith filter")
    if shift.is_identity:
        return series.with_frame(series.frame, stage=STAGE_TIME_SHIFT)
    frame = series.frame.copy()
    frame.index = (frame.index + pd.Timedelta(seconds=shift.delta_t)).as_unit("ns")
    frame.index.name = TIMESTAMP_COLUMN
    return series.with_frame(frame, stage=STAGE_TIME_SHIFT)


def label_series(
    series: IrradianceSeries,
    role: SplitRole,
    shift: TimeShift = TimeShift(),
    *,
    max_gap: float = DEFAULT_MAX_GAP_S,
    max_zenith: float = DEFAULT_MAX_ZENITH_DEG,
) -> IrradianceSeries:
    """Shift (training only), interpolate to 1 s, then drop high-zenith samples."""

    shifted = apply_time_shift(series, shift, role)
    return zenith_filter(interpolate_1s(shifted, max_gap=max_gap), max_zenith=max_zenith)


__all__ = [
    "ConsistencyVerdict",
    "ContractViolationError",
    "PipelineOrderError",
    "RejectReason",
    "SplitRole",
    "TimeShift",
    "apply_time_shift",
    "derive_dni",
    "fuse_sensors",
    "interpolate_1s",
    "label_series",
    "median_consistency_filter",
    "within_zenith_limit",
    "zenith_filter",
]
