"""Clear-sky models, clear-sky and clearness indices, and Reno clear-period detection."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Final, Mapping, Tuple

import numpy as np
import pandas as pd
import pvlib

from ..errors import ConfigError, DataError
from ..irradiance.series import IrradianceSeries
from .geometry import (
    Site,
    SolarConstant,
    SolarPosition,
    extraterrestrial_ghi_array,
    solar_position_frame,
)

_LOGGER = logging.getLogger(__name__)

DEFAULT_WINDOW_S: Final[float] = 600.0
MIN_WINDOW_SAMPLES: Final[int] = 3


class UndefinedIndexError(DataError):
    """Raised when an index is requested against a non-positive normaliser."""


class InsufficientDataError(DataError):
    """Raised when a detection window holds fewer than three samples."""


class ClearSkyKind(str, Enum):
    EXTRATERRESTRIAL = "extraterrestrial"
    SIMPLIFIED_SOLIS = "simplified_solis"


class SkyCondition(str, Enum):
    CLEAR = "clear"
    CLOUDY = "cloudy"

    @classmethod
    def from_flag(cls, clear: bool) -> "SkyCondition":
        return cls.CLEAR if clear else cls.CLOUDY


_SOLIS_DEFAULTS: Final[Dict[str, float]] = {"aod700": 0.1, "precipitable_water": 1.0}


@dataclass(frozen=True, slots=True)
class ClearSkyModel:
    kind: ClearSkyKind = ClearSkyKind.SIMPLIFIED_SOLIS
    parameters: Mapping[str, float] = field(default_factory=lambda: dict(_SOLIS_DEFAULTS))
    solar_constant: SolarConstant = SolarConstant()

    @classmethod
    def from_mapping(
        cls, payload: Mapping[str, Any], solar_constant: SolarConstant = SolarConstant()
    ) -> "ClearSkyModel":
        raw_kind = str(payload.get("kind", ClearSkyKind.SIMPLIFIED_SOLIS.value)).strip().lower()
        try:
            kind = ClearSkyKind(raw_kind)
        except ValueError as exc:
            raise ConfigError(f"Unknown clear-sky model kind '{raw_kind}'") from exc
        parameters = {key: value for key, value in payload.items() if key != "kind"}
        if kind is ClearSkyKind.SIMPLIFIED_SOLIS:
            unknown = set(parameters) - set(_SOLIS_DEFAULTS)
            if unknown:
                raise ConfigError(f"Unknown Solis parameters: {', '.join(sorted(unknown))}")
            merged = dict(_SOLIS_DEFAULTS)
            merged.update({key: float(value) for key, value in parameters.items()})
            parameters = merged
        elif parameters:
            raise ConfigError("The extraterrestrial clear-sky model takes no parameters")
        return cls(kind=kind, parameters=parameters, solar_constant=solar_constant)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, **dict(self.parameters)}


@dataclass(frozen=True, slots=True)
class ClearSkyContext:
    i_clr: float
    i_extr: float

    def __post_init__(self) -> None:
        if self.i_clr < 0 or self.i_clr > self.i_extr + 1e-9:
            raise DataError("clear-sky context requires 0 <= i_clr <= i_extr")


@dataclass(frozen=True, slots=True)
class RenoThresholds:
    """Reno criteria limits (W/m² unless noted) passed straight to pvlib."""

    mean_diff: float = 75.0
    max_diff: float = 75.0
    lower_line_length: float = -5.0
    upper_line_length: float = 10.0
    var_diff: float = 0.005
    slope_dev: float = 8.0
    max_iterations: int = 1

    def __post_init__(self) -> None:
        if self.lower_line_length >= self.upper_line_length:
            raise ConfigError("Reno line-length bounds must satisfy lower < upper")
        if self.max_iterations < 1:
            raise ConfigError("Reno max_iterations must be >= 1")


def predict_clear_sky_array(
    model: ClearSkyModel, zenith: np.ndarray, site: Site
) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(i_clr, i_extr)`` arrays for the given apparent zeniths."""

    zenith = np.atleast_1d(np.asarray(zenith, dtype=float))
    i_extr = extraterrestrial_ghi_array(zenith, model.solar_constant)
    if model.kind is ClearSkyKind.EXTRATERRESTRIAL:
        return i_extr.copy(), i_extr
    if model.kind is not ClearSkyKind.SIMPLIFIED_SOLIS:
        raise ConfigError(f"Unsupported clear-sky model kind '{model.kind}'")
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        solis = pvlib.clearsky.simplified_solis(
            90.0 - zenith,
            aod700=model.parameters["aod700"],
            precipitable_water=model.parameters["precipitable_water"],
            pressure=pvlib.atmosphere.alt2pres(site.altitude),
            dni_extra=model.solar_constant.value,
        )
    ghi = np.nan_to_num(np.asarray(solis["ghi"], dtype=float), nan=0.0, posinf=0.0, neginf=0.0)
    i_clr = np.where(zenith >= 90.0, 0.0, np.clip(ghi, 0.0, i_extr))
    return i_clr, i_extr


def predict_clear_sky(model: ClearSkyModel, pos: SolarPosition, site: Site) -> ClearSkyContext:
    i_clr, i_extr = predict_clear_sky_array(model, np.array([pos.zenith]), site)
    return ClearSkyContext(i_clr=float(i_clr[0]), i_extr=float(i_extr[0]))


def clear_sky_index(i: float, ctx: ClearSkyContext) -> float:
    if ctx.i_clr <= 0:
        raise UndefinedIndexError("clear-sky index undefined for i_clr <= 0")
    return i / ctx.i_clr


def clearness_index(i: float, ctx: ClearSkyContext) -> float:
    if ctx.i_extr <= 0:
        raise UndefinedIndexError("clearness index undefined for i_extr <= 0")
    return i / ctx.i_extr


def _regular_runs(index: pd.DatetimeIndex, daylight: np.ndarray, interval_ns: int) -> list[np.ndarray]:
    """Split daylight samples into runs of equally spaced timestamps."""

    positions = np.flatnonzero(daylight)
    if positions.size == 0:
        return []
    stamps = index.asi8[positions]
    breaks = np.flatnonzero((np.diff(positions) != 1) | (np.diff(stamps) != interval_ns)) + 1
    return [run for run in np.split(positions, breaks) if run.size]


def detect_clear_periods(
    series: IrradianceSeries,
    model: ClearSkyModel,
    window: float = DEFAULT_WINDOW_S,
    thresholds: RenoThresholds = RenoThresholds(),
) -> pd.Series:
    """Flag every sample clear (True) or cloudy (False).

    Detection runs independently on each daylight run of regularly spaced samples, so a
    window never straddles a night or a data gap. Runs shorter than one window are cloudy.
    """

    frame = series.frame
    flags = pd.Series(False, index=frame.index, name="clear")
    if len(frame) == 0:
        return flags
    interval = series.native_interval
    samples_per_window = int(window // interval)
    if samples_per_window < MIN_WINDOW_SAMPLES:
        raise InsufficientDataError(
            f"window of {window:.0f}s holds {samples_per_window} samples at {interval:.0f}s spacing; need >= 3"
        )

    index = frame.index.as_unit("ns")
    positions = solar_position_frame(series.site, index)
    zenith = positions["zenith"].to_numpy()
    i_clr, _ = predict_clear_sky_array(model, zenith, series.site)
    measured = frame["ghi"].to_numpy(dtype=float)
    daylight = (zenith < 90.0) & np.isfinite(measured)

    values = flags.to_numpy(copy=True)
    short_runs = 0
    for run in _regular_runs(index, daylight, int(round(interval * 1e9))):
        if run.size < samples_per_window:
            short_runs += 1
            continue
        run_index = index[run]
        try:
            clear = _detect_run(measured[run], i_clr[run], run_index, window, thresholds)
        except ValueError as exc:
            raise InsufficientDataError(str(exc)) from exc
        values[run] = np.asarray(clear, dtype=bool)
    if short_runs:
        _LOGGER.warning("%d daylight runs shorter than one %ss window flagged cloudy", short_runs, int(window))
    return pd.Series(values, index=frame.index, name="clear")


def _detect_run(
    measured: np.ndarray,
    clear_sky: np.ndarray,
    index: pd.DatetimeIndex,
    window: float,
    thresholds: RenoThresholds,
) -> pd.Series:
    with warnings.catch_warnings():
        # a single pass never "converges" in pvlib's sense
        warnings.filterwarnings("ignore", message="rescaling failed", category=RuntimeWarning)
        return pvlib.clearsky.detect_clearsky(
            pd.Series(measured, index=index),
            pd.Series(clear_sky, index=index),
            window_length=window / 60.0,
            mean_diff=thresholds.mean_diff,
            max_diff=thresholds.max_diff,
            lower_line_length=thresholds.lower_line_length,
            upper_line_length=thresholds.upper_line_length,
            var_diff=thresholds.var_diff,
            slope_dev=thresholds.slope_dev,
            max_iterations=thresholds.max_iterations,
        )


def annotate_sky_conditions(
    series: IrradianceSeries,
    model: ClearSkyModel,
    window: float = DEFAULT_WINDOW_S,
    thresholds: RenoThresholds = RenoThresholds(),
) -> IrradianceSeries:
    """Return ``series`` with a boolean ``clear`` column from :func:`detect_clear_periods`."""

    flags = detect_clear_periods(series, model, window, thresholds)
    frame = series.frame.copy()
    frame["clear"] = flags.to_numpy()
    clear_share = float(flags.mean()) if len(flags) else 0.0
    _LOGGER.info("Sky conditions annotated for %s: %.1f%% of samples clear", series.site.name, 100 * clear_share)
    return series.with_frame(frame, stage="sky_conditions")


__all__ = [
    "ClearSkyContext",
    "ClearSkyKind",
    "ClearSkyModel",
    "InsufficientDataError",
    "RenoThresholds",
    "SkyCondition",
    "UndefinedIndexError",
    "annotate_sky_conditions",
    "clear_sky_index",
    "clearness_index",
    "detect_clear_periods",
    "predict_clear_sky",
    "predict_clear_sky_array",
]
