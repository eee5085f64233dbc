"""Solar position and extraterrestrial irradiance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import timedelta, timezone
from typing import Any, Dict, Final, Mapping

import numpy as np
import pandas as pd
import pvlib

from ..errors import ConfigError, DataError

MIN_YEAR: Final[int] = 1950
MAX_YEAR: Final[int] = 2100
MAX_UTC_OFFSET_S: Final[int] = 50_400
DEFAULT_SOLAR_CONSTANT: Final[float] = 1366.0


class EphemerisRangeError(DataError):
    """Raised for instants outside the supported ephemeris years."""


@dataclass(frozen=True, slots=True)
class Site:
    """Measurement site; ``utc_offset`` is the local standard time offset in seconds."""

    name: str
    latitude: float
    longitude: float
    altitude: float = 0.0
    utc_offset: int = 0

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise ConfigError(f"Site '{self.name}' latitude must be within [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ConfigError(f"Site '{self.name}' longitude must be within [-180, 180]")
        if abs(self.utc_offset) > MAX_UTC_OFFSET_S:
            raise ConfigError(f"Site '{self.name}' utc_offset_s must be within ±{MAX_UTC_OFFSET_S}")

    @property
    def local_timezone(self) -> timezone:
        return timezone(timedelta(seconds=self.utc_offset))

    @classmethod
    def from_mapping(cls, payload: Mapping[str, Any]) -> "Site":
        allowed = {"name", "latitude", "longitude", "altitude_m", "utc_offset_s"}
        unknown = set(payload) - allowed
        if unknown:
            raise ConfigError(f"Unknown site keys: {', '.join(sorted(unknown))}")
        name = str(payload.get("name") or "").strip()
        if not name:
            raise ConfigError("Site definitions require a 'name'")
        try:
            return cls(
                name=name,
                latitude=float(payload["latitude"]),
                longitude=float(payload["longitude"]),
                altitude=float(payload.get("altitude_m", 0.0)),
                utc_offset=int(payload.get("utc_offset_s", 0)),
            )
        except KeyError as exc:
            raise ConfigError(f"Site '{name}' is missing {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"Site '{name}' has a non-numeric coordinate") from exc

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "latitude": self.latitude,
            "longitude": self.longitude,
            "altitude_m": self.altitude,
            "utc_offset_s": self.utc_offset,
        }


@dataclass(frozen=True, slots=True)
class SolarPosition:
    """Apparent zenith and azimuth in degrees; azimuth clockwise from north."""

    zenith: float
    azimuth: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.zenith <= 180.0:
            raise ValueError("zenith must be within [0, 180]")
        object.__setattr__(self, "azimuth", float(self.azimuth) % 360.0)


@dataclass(frozen=True, slots=True)
class SolarConstant:
    value: float = DEFAULT_SOLAR_CONSTANT

    def __post_init__(self) -> None:
        if self.value <= 0:
            raise ConfigError("solar constant must be > 0")


def to_utc_index(times: pd.DatetimeIndex | pd.Series | list) -> pd.DatetimeIndex:
    """Return a nanosecond, UTC DatetimeIndex; naive input is read as UTC."""

    index = pd.DatetimeIndex(times)
    if index.tz is None:
        index = index.tz_localize("UTC")
    else:
        index = index.tz_convert("UTC")
    return index.as_unit("ns")


def to_utc_timestamp(instant: Any) -> pd.Timestamp:
    stamp = pd.Timestamp(instant)
    if stamp.tzinfo is None:
        return stamp.tz_localize("UTC")
    return stamp.tz_convert("UTC")


def _check_range(times: pd.DatetimeIndex) -> None:
    if len(times) == 0:
        return
    years = times.year
    if years.min() < MIN_YEAR or years.max() > MAX_YEAR:
        raise EphemerisRangeError(
            f"Solar position supported for {MIN_YEAR}-{MAX_YEAR}, got {years.min()}-{years.max()}"
        )


def solar_position_frame(site: Site, times: Any) -> pd.DataFrame:
    """Vectorised solar position; returns ``zenith``/``azimuth`` columns indexed by ``times``."""

    index = to_utc_index(times)
    _check_range(index)
    if len(index) == 0:
        return pd.DataFrame({"zenith": [], "azimuth": []}, index=index, dtype=float)
    raw = pvlib.solarposition.get_solarposition(
        index,
        site.latitude,
        site.longitude,
        altitude=site.altitude,
        method="nrel_numpy",
    )
    zenith = np.clip(raw["apparent_zenith"].to_numpy(dtype=float), 0.0, 180.0)
    azimuth = np.mod(raw["azimuth"].to_numpy(dtype=float), 360.0)
    return pd.DataFrame({"zenith": zenith, "azimuth": azimuth}, index=index)


def solar_position(site: Site, instant: Any) -> SolarPosition:
    frame = solar_position_frame(site, [to_utc_timestamp(instant)])
    row = frame.iloc[0]
    return SolarPosition(zenith=float(row["zenith"]), azimuth=float(row["azimuth"]))


def extraterrestrial_ghi(pos: SolarPosition, i0: SolarConstant = SolarConstant()) -> float:
    if pos.zenith >= 90.0:
        return 0.0
    return max(0.0, i0.value * math.cos(math.radians(pos.zenith)))


def extraterrestrial_ghi_array(zenith: np.ndarray, i0: SolarConstant = SolarConstant()) -> np.ndarray:
    zenith = np.asarray(zenith, dtype=float)
    value = i0.value * np.cos(np.radians(zenith))
    return np.where(zenith >= 90.0, 0.0, np.clip(value, 0.0, None))


__all__ = [
    "DEFAULT_SOLAR_CONSTANT",
    "EphemerisRangeError",
    "Site",
    "SolarConstant",
    "SolarPosition",
    "extraterrestrial_ghi",
    "extraterrestrial_ghi_array",
    "solar_position",
    "solar_position_frame",
    "to_utc_index",
    "to_utc_timestamp",
]
