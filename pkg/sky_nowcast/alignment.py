"""Image/label alignment, timestamp drift audits and second-of-minute histograms."""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError
from .imaging.manifest import ImageManifest
from .irradiance.pipeline import STAGE_INTERPOLATE
from .irradiance.series import IrradianceSeries, format_timestamps, parse_timestamps
from .solar.clearsky import ClearSkyContext, ClearSkyModel, SkyCondition, predict_clear_sky_array
from .solar.geometry import Site, SolarPosition, solar_position_frame

_LOGGER = logging.getLogger(__name__)

PAIR_COLUMNS = ("instant_utc", "image_path", "ghi", "i_clr", "i_extr", "sky_condition", "zenith", "azimuth")


class TimestampSource(str, Enum):
    FILE_NAME = "file_name"
    DATE_MODIFIED = "date_modified"

    @property
    def column(self) -> str:
        return "ts_file_name" if self is TimestampSource.FILE_NAME else "ts_date_modified"


class DropReason(str, Enum):
    MISSING_TIMESTAMP = "missing_timestamp"
    FN_DM_GAP = "fn_dm_gap"
    LABEL_GAP = "label_gap"


@dataclass(frozen=True, slots=True)
class TimestampPolicy:
    source: TimestampSource = TimestampSource.FILE_NAME
    max_fn_dm_gap: Optional[float] = None

    def __post_init__(self) -> None:
        if self.max_fn_dm_gap is not None and self.max_fn_dm_gap <= 0:
            raise ConfigError("max_fn_dm_gap must be > 0 when set")

    @classmethod
    def from_mapping(cls, payload: Mapping[str, Any]) -> "TimestampPolicy":
        unknown = set(payload) - {"source", "max_fn_dm_gap_s"}
        if unknown:
            raise ConfigError(f"Unknown timestamp policy keys: {', '.join(sorted(unknown))}")
        raw = str(payload.get("source", TimestampSource.FILE_NAME.value)).strip().lower()
        try:
            source = TimestampSource(raw)
        except ValueError as exc:
            raise ConfigError(f"Unknown timestamp source '{raw}'") from exc
        gap = payload.get("max_fn_dm_gap_s")
        return cls(source=source, max_fn_dm_gap=None if gap is None else float(gap))

    def to_dict(self) -> Dict[str, Any]:
        return {"source": self.source.value, "max_fn_dm_gap_s": self.max_fn_dm_gap}


@dataclass(frozen=True, slots=True)
class AlignedPair:
    image_ref: str
    label_ghi: float
    ctx: ClearSkyContext
    sky_flag: SkyCondition
    instant: pd.Timestamp
    position: SolarPosition


@dataclass(frozen=True, slots=True)
class DroppedImage:
    image_ref: str
    reason: DropReason
    instant: Optional[pd.Timestamp] = None


@dataclass(frozen=True, slots=True)
class AlignmentResult:
    pairs: Tuple[AlignedPair, ...]
    dropped: Tuple[DroppedImage, ...]

    def __len__(self) -> int:
        return len(self.pairs)

    def drop_counts(self) -> Dict[str, int]:
        counts = {reason.value: 0 for reason in DropReason}
        for item in self.dropped:
            counts[item.reason.value] += 1
        return counts


@dataclass(frozen=True, slots=True)
class DriftReport:
    """Mean ``file name − date modified`` in seconds for one day; positive means FN is ahead."""

    day: dt.date
    mean_offset_s: float
    n_images: int


def _whole_seconds(values: pd.Series) -> pd.Series:
    return values.dt.floor("s")


def align(
    manifest: ImageManifest,
    series: IrradianceSeries,
    policy: TimestampPolicy,
    model: ClearSkyModel,
) -> AlignmentResult:
    """Label each image with the 1-s interpolated irradiance at its policy-selected instant."""

    if STAGE_INTERPOLATE not in series.stages and series.native_interval != 1.0:
        raise DataError("alignment needs a series interpolated to 1 s")
    if not series.has_sky_conditions:
        raise DataError("alignment needs sky conditions; annotate the series first")

    frame = manifest.frame
    dropped: List[DroppedImage] = []
    chosen = frame[policy.source.column]
    missing = chosen.isna()
    if policy.max_fn_dm_gap is not None:
        missing |= frame["ts_file_name"].isna() | frame["ts_date_modified"].isna()
    for ref in frame.loc[missing, "path"]:
        dropped.append(DroppedImage(image_ref=ref, reason=DropReason.MISSING_TIMESTAMP))
    frame = frame.loc[~missing]

    if policy.max_fn_dm_gap is not None and len(frame):
        gap = (frame["ts_file_name"] - frame["ts_date_modified"]).dt.total_seconds().abs()
        too_far = (gap > policy.max_fn_dm_gap).to_numpy()
        for ref, instant in zip(frame.loc[too_far, "path"], frame.loc[too_far, policy.source.column]):
            dropped.append(DroppedImage(image_ref=ref, reason=DropReason.FN_DM_GAP, instant=instant))
        frame = frame.loc[~too_far]

    instants = pd.DatetimeIndex(_whole_seconds(frame[policy.source.column])).as_unit("ns")
    labels = series.frame.reindex(instants)
    has_label = labels["ghi"].notna().to_numpy()
    for ref, instant in zip(frame["path"].to_numpy()[~has_label], instants[~has_label]):
        dropped.append(DroppedImage(image_ref=ref, reason=DropReason.LABEL_GAP, instant=instant))

    refs = frame["path"].to_numpy()[has_label]
    instants = instants[has_label]
    labels = labels.loc[has_label]
    if len(instants) == 0:
        _LOGGER.warning(
            "No image instant overlaps the irradiance series (%d images, %d labels)", len(manifest), len(series)
        )
        return AlignmentResult(pairs=(), dropped=tuple(dropped))

    positions = solar_position_frame(series.site, instants)
    zenith = positions["zenith"].to_numpy()
    azimuth = positions["azimuth"].to_numpy()
    i_clr, i_extr = predict_clear_sky_array(model, zenith, series.site)
    ghi = labels["ghi"].to_numpy(dtype=float)
    clear = labels["clear"].to_numpy(dtype=bool)

    pairs = [
        AlignedPair(
            image_ref=str(refs[k]),
            label_ghi=float(ghi[k]),
            ctx=ClearSkyContext(i_clr=float(i_clr[k]), i_extr=float(i_extr[k])),
            sky_flag=SkyCondition.from_flag(bool(clear[k])),
            instant=instants[k],
            position=SolarPosition(zenith=float(zenith[k]), azimuth=float(azimuth[k])),
        )
        for k in range(len(refs))
    ]
    pairs.sort(key=lambda pair: (pair.instant, pair.image_ref))
    result = AlignmentResult(pairs=tuple(pairs), dropped=tuple(sorted(dropped, key=lambda item: item.image_ref)))
    _LOGGER.info("Aligned %d images; dropped %s", len(pairs), result.drop_counts())
    return result


def _local_date(stamps: pd.Series, utc_offset_s: int) -> pd.Series:
    return (stamps.dt.tz_convert(None) + pd.Timedelta(seconds=utc_offset_s)).dt.date


def drift_report(manifest: ImageManifest, utc_offset_s: int = 0) -> List[DriftReport]:
    """Per-day mean of ``FN − DM`` in seconds, days taken in local standard time."""

    frame = manifest.frame
    complete = frame["ts_file_name"].notna() & frame["ts_date_modified"].notna()
    excluded = int((~complete).sum())
    if excluded:
        _LOGGER.warning("%d images lack a timestamp and are excluded from the drift report", excluded)
    frame = frame.loc[complete]
    if frame.empty:
        return []
    offsets = (frame["ts_file_name"] - frame["ts_date_modified"]).dt.total_seconds()
    days = _local_date(frame["ts_date_modified"], utc_offset_s)
    grouped = offsets.groupby(days.to_numpy()).agg(["mean", "count"])
    return [
        DriftReport(day=day, mean_offset_s=float(row["mean"]), n_images=int(row["count"]))
        for day, row in grouped.sort_index().iterrows()
    ]


def second_histogram(manifest: ImageManifest, source: TimestampSource) -> np.ndarray:
    stamps = manifest.frame[source.column].dropna()
    return np.bincount(stamps.dt.second.to_numpy(dtype=int), minlength=60)[:60]


def pairs_to_frame(pairs: Sequence[AlignedPair]) -> pd.DataFrame:
    if not pairs:
        return pd.DataFrame(columns=list(PAIR_COLUMNS))
    return pd.DataFrame(
        {
            "instant_utc": format_timestamps(pd.DatetimeIndex([pair.instant for pair in pairs])),
            "image_path": [pair.image_ref for pair in pairs],
            "ghi": [pair.label_ghi for pair in pairs],
            "i_clr": [pair.ctx.i_clr for pair in pairs],
            "i_extr": [pair.ctx.i_extr for pair in pairs],
            "sky_condition": [pair.sky_flag.value for pair in pairs],
            "zenith": [pair.position.zenith for pair in pairs],
            "azimuth": [pair.position.azimuth for pair in pairs],
        }
    )


def pairs_from_frame(frame: pd.DataFrame) -> List[AlignedPair]:
    missing = [column for column in PAIR_COLUMNS if column not in frame.columns]
    if missing:
        raise DataError(f"pairs table is missing columns: {', '.join(missing)}")
    if frame.empty:
        return []
    instants = parse_timestamps(frame["instant_utc"])
    return [
        AlignedPair(
            image_ref=str(row.image_path),
            label_ghi=float(row.ghi),
            ctx=ClearSkyContext(i_clr=float(row.i_clr), i_extr=float(row.i_extr)),
            sky_flag=SkyCondition(str(row.sky_condition)),
            instant=instant,
            position=SolarPosition(zenith=float(row.zenith), azimuth=float(row.azimuth)),
        )
        for row, instant in zip(frame.itertuples(index=False), instants)
    ]


def dropped_to_frame(dropped: Iterable[DroppedImage]) -> pd.DataFrame:
    rows = [
        {
            "image_path": item.image_ref,
            "reason": item.reason.value,
            "instant_utc": "" if item.instant is None else item.instant.strftime("%Y-%m-%dT%H:%M:%SZ"),
        }
        for item in dropped
    ]
    return pd.DataFrame(rows, columns=["image_path", "reason", "instant_utc"])


def drift_to_frame(reports: Sequence[DriftReport]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "day": [report.day.isoformat() for report in reports],
            "mean_offset_s": [report.mean_offset_s for report in reports],
            "n_images": [report.n_images for report in reports],
        }
    )


def local_day(instant: pd.Timestamp, site: Site) -> dt.date:
    return (instant.tz_convert(None) + pd.Timedelta(seconds=site.utc_offset)).date()


__all__ = [
    "AlignedPair",
    "AlignmentResult",
    "DriftReport",
    "DropReason",
    "DroppedImage",
    "PAIR_COLUMNS",
    "TimestampPolicy",
    "TimestampSource",
    "align",
    "drift_report",
    "drift_to_frame",
    "dropped_to_frame",
    "local_day",
    "pairs_from_frame",
    "pairs_to_frame",
    "second_histogram",
]
