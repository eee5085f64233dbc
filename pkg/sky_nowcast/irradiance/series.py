"""Irradiance samples, series container and CSV I/O."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Final, Iterator, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import DataError
from ..solar.geometry import Site, to_utc_index

_LOGGER = logging.getLogger(__name__)

COMPONENTS: Final[Tuple[str, ...]] = ("ghi", "dhi", "dni")
TIMESTAMP_COLUMN: Final[str] = "timestamp_utc"
SKY_CONDITION_COLUMN: Final[str] = "sky_condition"
TIMESTAMP_FORMAT: Final[str] = "%Y-%m-%dT%H:%M:%SZ"


@dataclass(frozen=True, slots=True)
class IrradianceSample:
    timestamp: pd.Timestamp
    ghi: Optional[float]
    dhi: Optional[float] = None
    dni: Optional[float] = None
    source: str = "default"

    def __post_init__(self) -> None:
        for name in COMPONENTS:
            value = getattr(self, name)
            if value is not None and value < 0:
                raise DataError(f"{name} must be >= 0 at {self.timestamp}")


@dataclass(slots=True)
class IrradianceSeries:
    """Time-ordered irradiance frame for one site.

    ``frame`` is indexed by a UTC ``DatetimeIndex`` and carries ``ghi``, ``dhi`` and
    ``dni`` plus optional ``interpolated``, ``clear`` and ``rejected_reason`` columns.
    ``stages`` records the processing steps applied so far.
    """

    site: Site
    frame: pd.DataFrame
    native_interval: float
    stages: Tuple[str, ...] = ()
    gap_seconds: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        index = self.frame.index
        if not isinstance(index, pd.DatetimeIndex):
            raise DataError("irradiance frame must be indexed by timestamps")
        if len(index) and (index.has_duplicates or not index.is_monotonic_increasing):
            raise DataError("irradiance timestamps must be strictly increasing")
        for name in COMPONENTS:
            if name not in self.frame.columns:
                raise DataError(f"irradiance frame is missing the '{name}' column")
        if self.native_interval <= 0:
            raise DataError("native_interval must be > 0")

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def index(self) -> pd.DatetimeIndex:
        return self.frame.index

    @property
    def has_sky_conditions(self) -> bool:
        return "clear" in self.frame.columns

    def with_frame(self, frame: pd.DataFrame, *, stage: Optional[str] = None, **changes) -> "IrradianceSeries":
        stages = self.stages + ((stage,) if stage else ())
        return replace(self, frame=frame, stages=stages, **changes)

    def samples(self) -> Iterator[IrradianceSample]:
        for stamp, row in self.frame.iterrows():
            yield IrradianceSample(
                timestamp=stamp,
                ghi=_optional(row["ghi"]),
                dhi=_optional(row["dhi"]),
                dni=_optional(row["dni"]),
            )

    def between(self, start: pd.Timestamp, end: pd.Timestamp) -> "IrradianceSeries":
        """Rows with ``start <= t < end``."""

        index = self.frame.index
        mask = (index >= start) & (index < end)
        return replace(self, frame=self.frame.loc[mask].copy())

    @classmethod
    def from_samples(
        cls,
        site: Site,
        samples: Sequence[IrradianceSample],
        native_interval: Optional[float] = None,
    ) -> "IrradianceSeries":
        ordered = sorted(samples, key=lambda sample: sample.timestamp)
        index = to_utc_index([sample.timestamp for sample in ordered])
        index.name = TIMESTAMP_COLUMN
        frame = pd.DataFrame(
            {name: [_nan(getattr(sample, name)) for sample in ordered] for name in COMPONENTS},
            index=index,
            dtype=float,
        )
        return cls(site=site, frame=frame, native_interval=native_interval or infer_interval(index))


def _optional(value: float) -> Optional[float]:
    return None if pd.isna(value) else float(value)


def _nan(value: Optional[float]) -> float:
    return np.nan if value is None else float(value)


def infer_interval(index: pd.DatetimeIndex) -> float:
    """Median spacing in seconds; 60 s when fewer than two samples exist."""

    if len(index) < 2:
        return 60.0
    deltas = np.diff(index.as_unit("ns").asi8) / 1e9
    return float(np.median(deltas))


def format_timestamps(index: pd.DatetimeIndex | pd.Series) -> pd.Index:
    return pd.Index(pd.DatetimeIndex(index).tz_convert("UTC").strftime(TIMESTAMP_FORMAT))


def parse_timestamps(values: pd.Series) -> pd.DatetimeIndex:
    return pd.DatetimeIndex(pd.to_datetime(values, utc=True)).as_unit("ns")


def read_measurements(path: Path | str) -> pd.DataFrame:
    """Load a raw measurement CSV (``timestamp_utc, ghi, dhi, dni[, sensor_id]``)."""

    raw = pd.read_csv(path)
    if TIMESTAMP_COLUMN not in raw.columns:
        raise DataError(f"{path}: missing '{TIMESTAMP_COLUMN}' column")
    for name in COMPONENTS:
        if name not in raw.columns:
            raw[name] = np.nan
    raw[TIMESTAMP_COLUMN] = parse_timestamps(raw[TIMESTAMP_COLUMN])
    if "sensor_id" not in raw.columns:
        raw["sensor_id"] = "default"
    raw["sensor_id"] = raw["sensor_id"].astype(str)
    for name in COMPONENTS:
        raw[name] = pd.to_numeric(raw[name], errors="coerce")
    return raw


def is_multi_sensor(raw: pd.DataFrame) -> bool:
    return bool(raw[TIMESTAMP_COLUMN].duplicated().any())


def series_from_measurements(site: Site, raw: pd.DataFrame) -> IrradianceSeries:
    if is_multi_sensor(raw):
        raise DataError("multi-sensor measurements must be fused before building a series")
    frame = raw.sort_values(TIMESTAMP_COLUMN).set_index(TIMESTAMP_COLUMN)
    frame.index = to_utc_index(frame.index)
    frame.index.name = TIMESTAMP_COLUMN
    columns = list(COMPONENTS)
    if "clear" in frame.columns:
        columns.append("clear")
    if SKY_CONDITION_COLUMN in frame.columns:
        frame["clear"] = frame[SKY_CONDITION_COLUMN].astype(str).str.lower().eq("clear")
        columns.append("clear")
    for optional in ("interpolated", "rejected_reason"):
        if optional in frame.columns:
            columns.append(optional)
    frame = frame.loc[:, list(dict.fromkeys(columns))]
    return IrradianceSeries(site=site, frame=frame, native_interval=infer_interval(frame.index))


def read_series(path: Path | str, site: Site) -> IrradianceSeries:
    return series_from_measurements(site, read_measurements(path))


def series_to_csv_frame(series: IrradianceSeries) -> pd.DataFrame:
    frame = series.frame
    out = pd.DataFrame({TIMESTAMP_COLUMN: format_timestamps(frame.index)})
    for name in COMPONENTS:
        out[name] = frame[name].to_numpy()
    out["interpolated"] = (
        frame["interpolated"].to_numpy(dtype=bool) if "interpolated" in frame.columns else False
    )
    if "rejected_reason" in frame.columns:
        out["rejected_reason"] = frame["rejected_reason"].fillna("").to_numpy()
    else:
        out["rejected_reason"] = ""
    if "clear" in frame.columns:
        out[SKY_CONDITION_COLUMN] = np.where(frame["clear"].to_numpy(dtype=bool), "clear", "cloudy")
    return out


__all__ = [
    "COMPONENTS",
    "IrradianceSample",
    "IrradianceSeries",
    "format_timestamps",
    "infer_interval",
    "is_multi_sensor",
    "parse_timestamps",
    "read_measurements",
    "read_series",
    "series_from_measurements",
    "series_to_csv_frame",
]
