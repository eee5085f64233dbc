"""Image manifest: one row per frame with both of its timestamps."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Final, Iterable, Iterator, Optional, Sequence

import pandas as pd

from ..errors import DataError
from ..irradiance.series import format_timestamps
from ..solar.geometry import to_utc_timestamp
from .image import Exposure

MANIFEST_COLUMNS: Final = ("path", "ts_file_name", "ts_date_modified", "exposure", "site")
_FILENAME_STAMP = re.compile(r"(\d{8})_(\d{6})")


@dataclass(frozen=True, slots=True)
class ManifestRecord:
    path: str
    ts_file_name: Optional[pd.Timestamp]
    ts_date_modified: Optional[pd.Timestamp]
    exposure: Exposure = Exposure.LONG
    site: str = ""


def parse_filename_timestamp(name: str, utc_offset_s: int = 0) -> Optional[pd.Timestamp]:
    """Read the ``YYYYMMDD_HHMMSS`` stamp of a file name; ``utc_offset_s`` is the camera clock offset."""

    match = _FILENAME_STAMP.search(Path(name).name)
    if match is None:
        return None
    try:
        local = pd.Timestamp(pd.to_datetime(match.group(1) + match.group(2), format="%Y%m%d%H%M%S"))
    except ValueError:
        return None
    return (local - pd.Timedelta(seconds=utc_offset_s)).tz_localize("UTC")


def filename_for(instant: pd.Timestamp, prefix: str = "", suffix: str = ".png", utc_offset_s: int = 0) -> str:
    local = to_utc_timestamp(instant).tz_convert(None) + pd.Timedelta(seconds=utc_offset_s)
    return f"{prefix}{local.strftime('%Y%m%d_%H%M%S')}{suffix}"


class ImageManifest:
    """Immutable manifest backed by a DataFrame; timestamps are UTC, missing ones are ``NaT``."""

    def __init__(self, frame: pd.DataFrame) -> None:
        missing = [column for column in MANIFEST_COLUMNS if column not in frame.columns]
        if missing:
            raise DataError(f"manifest is missing columns: {', '.join(missing)}")
        frame = frame.loc[:, list(MANIFEST_COLUMNS)].copy()
        for column in ("ts_file_name", "ts_date_modified"):
            frame[column] = pd.to_datetime(frame[column], utc=True).dt.as_unit("ns")
        frame["path"] = frame["path"].astype(str)
        frame["exposure"] = frame["exposure"].fillna(Exposure.LONG.value).astype(str).str.lower()
        frame["site"] = frame["site"].fillna("").astype(str)
        if frame["path"].duplicated().any():
            raise DataError("manifest paths must be unique")
        self._frame = frame.sort_values("path", kind="stable").reset_index(drop=True)

    @property
    def frame(self) -> pd.DataFrame:
        return self._frame.copy()

    def __len__(self) -> int:
        return len(self._frame)

    def __iter__(self) -> Iterator[ManifestRecord]:
        for row in self._frame.itertuples(index=False):
            yield ManifestRecord(
                path=row.path,
                ts_file_name=None if pd.isna(row.ts_file_name) else row.ts_file_name,
                ts_date_modified=None if pd.isna(row.ts_date_modified) else row.ts_date_modified,
                exposure=Exposure(row.exposure),
                site=row.site,
            )

    @classmethod
    def from_records(cls, records: Iterable[ManifestRecord]) -> "ImageManifest":
        rows = [
            {
                "path": record.path,
                "ts_file_name": record.ts_file_name,
                "ts_date_modified": record.ts_date_modified,
                "exposure": record.exposure.value,
                "site": record.site,
            }
            for record in records
        ]
        return cls(pd.DataFrame(rows, columns=list(MANIFEST_COLUMNS)))

    @classmethod
    def read_csv(cls, path: Path | str) -> "ImageManifest":
        frame = pd.read_csv(
            path,
            dtype={"path": str, "exposure": str, "site": str},
            keep_default_na=False,
            na_values={"ts_file_name": [""], "ts_date_modified": [""]},
        )
        return cls(frame)

    def with_exposure(self, exposure: Exposure) -> "ImageManifest":
        return ImageManifest(self._frame.loc[self._frame["exposure"] == exposure.value])

    def with_paths(self, paths: Sequence[str]) -> "ImageManifest":
        frame = self._frame.copy()
        frame["path"] = list(paths)
        return ImageManifest(frame)

    def to_csv_frame(self) -> pd.DataFrame:
        out = self._frame.copy()
        for column in ("ts_file_name", "ts_date_modified"):
            values = out[column]
            formatted = pd.Series("", index=out.index, dtype=object)
            present = values.notna()
            if present.any():
                formatted[present] = format_timestamps(pd.DatetimeIndex(values[present])).to_numpy()
            out[column] = formatted
        return out


__all__ = [
    "ImageManifest",
    "MANIFEST_COLUMNS",
    "ManifestRecord",
    "filename_for",
    "parse_filename_timestamp",
]
