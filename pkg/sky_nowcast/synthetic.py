"""Synthetic sky-image and irradiance corpora with known ground truth.

Clouds are opaque-ish discs drifting across the image plane (wrapping toroidally);
the true clear-sky index follows the fraction of the sun disc they cover. The
generator emits the same manifest, irradiance and frame formats as real data.
"""

from __future__ import annotations

import datetime as dt
import functools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Final, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .alignment import AlignedPair
from .errors import ConfigError, DataError
from .imaging.image import Exposure, resize_box
from .imaging.manifest import ImageManifest, ManifestRecord, filename_for
from .imaging.sunmask import CameraModel, Projection, sun_centers
from .irradiance.series import COMPONENTS, TIMESTAMP_COLUMN, IrradianceSeries, format_timestamps
from .nowcasting import LEAD_MINUTES, SequenceSample, VideoPredictor
from .solar.clearsky import ClearSkyModel, predict_clear_sky_array
from .solar.geometry import Site, solar_position_frame, to_utc_timestamp

_LOGGER = logging.getLogger(__name__)

SKY_RGB: Final[Tuple[int, int, int]] = (80, 120, 200)
SUN_RGB: Final[Tuple[int, int, int]] = (255, 250, 235)
CLOUD_RGB: Final[Tuple[int, int, int]] = (80, 200, 200)
RENDER_SUPERSAMPLING: Final[int] = 4
OCCLUSION_SUPERSAMPLING: Final[int] = 2
MAX_WINDOW_S: Final[int] = 120
STAGE_SYNTHETIC: Final[str] = "synthetic"
_HORIZON_GUARD_DEG: Final[float] = 89.0
_CHUNK: Final[int] = 2048


class Averaging(str, Enum):
    NONE = "none"
    BACKWARD = "backward"
    FORWARD = "forward"


@dataclass(frozen=True, slots=True)
class CloudModel:
    """``count`` discs of ``radius_px`` moving at ``velocity`` (px/min, x then y); zero count means clear."""

    count: int = 0
    radius_px: float = 8.0
    velocity: Tuple[float, float] = (2.0, 0.0)
    opacity: float = 1.0

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ConfigError("cloud count must be >= 0")
        if self.radius_px <= 0:
            raise ConfigError("cloud radius must be > 0")
        if not 0.0 <= self.opacity <= 1.0:
            raise ConfigError("cloud opacity must be within [0, 1]")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "count": self.count,
            "radius_px": self.radius_px,
            "velocity": list(self.velocity),
            "opacity": self.opacity,
        }


def _default_camera() -> CameraModel:
    return CameraModel(projection=Projection.EQUIDISTANT, focal=0.5, theta_c=0.0, width=64)


@dataclass(frozen=True, slots=True)
class SyntheticScenario:
    site: Site
    start: dt.date
    days: int = 1
    day_stride: int = 1
    cloud_model: CloudModel = CloudModel()
    drift_schedule: Tuple[float, ...] = ()
    averaging: Averaging = Averaging.NONE
    window_s: int = 60
    seed: int = 0
    camera: CameraModel = field(default_factory=_default_camera)
    clear_sky: ClearSkyModel = field(default_factory=ClearSkyModel)
    kt_floor: float = 0.3
    image_interval_s: int = 60
    capture_jitter_s: int = 0
    max_zenith: float = 85.0
    exposure: Exposure = Exposure.LONG
    filename_utc_offset_s: int = 0

    def __post_init__(self) -> None:
        if self.days < 1 or self.day_stride < 1:
            raise ConfigError("scenario days and day_stride must be >= 1")
        if not 1 <= self.window_s <= MAX_WINDOW_S:
            raise ConfigError(f"averaging window must be within [1, {MAX_WINDOW_S}] s")
        if not 0.0 < self.kt_floor <= 1.0:
            raise ConfigError("kt_floor must be within (0, 1]")
        if self.image_interval_s < 1:
            raise ConfigError("image interval must be >= 1 s")
        if not 0 <= self.capture_jitter_s < self.image_interval_s:
            raise ConfigError("capture jitter must be within [0, image interval)")
        if not 0.0 < self.max_zenith <= 88.0:
            raise ConfigError("max_zenith must be within (0, 88]")

    def drift_for(self, day_index: int) -> float:
        """``FN − DM`` seconds for a day; the schedule repeats when shorter than the corpus."""

        if not self.drift_schedule:
            return 0.0
        return float(self.drift_schedule[day_index % len(self.drift_schedule)])

    def day_origin(self, day_index: int) -> pd.Timestamp:
        """Local standard midnight of the day, in UTC."""

        local = pd.Timestamp(self.start) + pd.Timedelta(days=day_index * self.day_stride)
        return (local - pd.Timedelta(seconds=self.site.utc_offset)).tz_localize("UTC")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "site": self.site.to_dict(),
            "start": self.start.isoformat(),
            "days": self.days,
            "day_stride": self.day_stride,
            "cloud_model": self.cloud_model.to_dict(),
            "drift_schedule": list(self.drift_schedule),
            "averaging": self.averaging.value,
            "window_s": self.window_s,
            "seed": self.seed,
            "camera": self.camera.to_dict(),
            "kt_floor": self.kt_floor,
            "image_interval_s": self.image_interval_s,
            "capture_jitter_s": self.capture_jitter_s,
            "max_zenith": self.max_zenith,
        }


def kt_from_occlusion(occlusion: np.ndarray, opacity: float, floor: float) -> np.ndarray:
    """Monotone non-increasing map from covered sun fraction to the clear-sky index."""

    return 1.0 - (1.0 - floor) * opacity * np.clip(occlusion, 0.0, 1.0)


def cloud_centers(origin_xy: np.ndarray, velocity: Tuple[float, float], seconds: np.ndarray, width: int) -> np.ndarray:
    """Cloud centres (N×K×2) at ``seconds`` after the day origin, wrapped onto the image torus."""

    drift = np.asarray(seconds, dtype=float)[:, np.newaxis, np.newaxis] / 60.0 * np.asarray(velocity, dtype=float)
    return np.mod(origin_xy[np.newaxis, :, :] + drift, width)


def _toroidal_covered(points: np.ndarray, centers: np.ndarray, radius: float, width: int) -> np.ndarray:
    """points N×P×2, centers N×K×2 → N×P boolean coverage."""

    if centers.shape[1] == 0:
        return np.zeros(points.shape[:2], dtype=bool)
    delta = points[:, :, np.newaxis, :] - centers[:, np.newaxis, :, :]
    delta = np.mod(delta + width / 2.0, width) - width / 2.0
    return np.any(np.sum(delta**2, axis=-1) <= radius * radius, axis=-1)


@functools.lru_cache(maxsize=8)
def _disc_offsets(radius: float, step: float) -> np.ndarray:
    ticks = np.arange(-radius + step / 2.0, radius, step)
    xs, ys = np.meshgrid(ticks, ticks)
    inside = xs**2 + ys**2 <= radius * radius
    return np.column_stack([xs[inside], ys[inside]])


def occlusion_fraction(
    sun_xy: np.ndarray, clouds_xy: np.ndarray, cloud_radius: float, sun_radius: float, width: int
) -> np.ndarray:
    """Share of the sun disc covered by at least one cloud, per instant."""

    offsets = _disc_offsets(sun_radius, 1.0 / OCCLUSION_SUPERSAMPLING)
    out = np.zeros(len(sun_xy))
    for start in range(0, len(sun_xy), _CHUNK):
        stop = start + _CHUNK
        points = sun_xy[start:stop, np.newaxis, :] + offsets[np.newaxis, :, :]
        out[start:stop] = _toroidal_covered(points, clouds_xy[start:stop], cloud_radius, width).mean(axis=1)
    return out


class SkyRenderer:
    """Draws sky, sun and clouds at 4× resolution then box-filters down to the camera width."""

    def __init__(self, camera: CameraModel, cloud_model: CloudModel) -> None:
        self._camera = camera
        self._clouds = cloud_model
        width = camera.width
        ticks = (np.arange(width * RENDER_SUPERSAMPLING) + 0.5) / RENDER_SUPERSAMPLING
        self._xs, self._ys = np.meshgrid(ticks, ticks)
        half = width / 2.0
        self._roi = (self._xs - half) ** 2 + (self._ys - half) ** 2 <= half * half

    def render(self, sun_xy: Sequence[float], clouds_xy: np.ndarray) -> np.ndarray:
        width = self._camera.width
        radius = self._camera.mask_radius
        sun = (self._xs - sun_xy[0]) ** 2 + (self._ys - sun_xy[1]) ** 2 <= radius * radius
        canvas = np.where(sun[..., np.newaxis], np.array(SUN_RGB, float), np.array(SKY_RGB, float))
        if len(clouds_xy):
            points = np.stack([self._xs.ravel(), self._ys.ravel()], axis=1)[np.newaxis]
            covered = _toroidal_covered(points, np.asarray(clouds_xy)[np.newaxis], self._clouds.radius_px, width)
            weight = (self._clouds.opacity * covered.reshape(self._xs.shape))[..., np.newaxis]
            canvas = canvas * (1.0 - weight) + np.array(CLOUD_RGB, float) * weight
        canvas[~self._roi] = 0.0
        return resize_box(np.rint(canvas).astype(np.uint8), width)


@dataclass(slots=True)
class SyntheticDay:
    day_index: int
    origin: pd.Timestamp
    clouds_origin: np.ndarray
    records: List[ManifestRecord]
    images: Dict[str, np.ndarray]
    knots: pd.DataFrame
    kt_true: pd.Series
    truth_ghi: Dict[str, float]


def _empty_knots() -> pd.DataFrame:
    index = pd.DatetimeIndex([], tz="UTC", name=TIMESTAMP_COLUMN).as_unit("ns")
    return pd.DataFrame({name: pd.Series(dtype=float) for name in COMPONENTS}, index=index)


def _window_means(values: np.ndarray, starts: np.ndarray, stops: np.ndarray) -> np.ndarray:
    cumulative = np.concatenate([[0.0], np.cumsum(values)])
    return (cumulative[stops] - cumulative[starts]) / (stops - starts)


def generate_day(scenario: SyntheticScenario, day_index: int, seed: np.random.SeedSequence) -> SyntheticDay:
    """Render one site-local day. Pure given its seed, so days can run in parallel."""

    rng = np.random.default_rng(seed)
    site, camera, clouds = scenario.site, scenario.camera, scenario.cloud_model
    width = camera.width
    origin = scenario.day_origin(day_index)
    clouds_origin = rng.uniform(0.0, width, size=(clouds.count, 2))

    minute_zenith = solar_position_frame(site, origin + pd.to_timedelta(np.arange(0, 86_400, 60), unit="s"))
    day_minutes = np.flatnonzero(minute_zenith["zenith"].to_numpy() <= scenario.max_zenith)
    if day_minutes.size == 0:
        _LOGGER.warning("Day %s has no sun above %.0f° zenith; skipped", origin.date(), scenario.max_zenith)
        return SyntheticDay(day_index, origin, clouds_origin, [], {}, _empty_knots(), pd.Series(dtype=float), {})

    margin = max(3 * MAX_WINDOW_S // 2, scenario.image_interval_s)
    first = int(day_minutes[0]) * 60 - margin
    seconds = np.arange(first, int(day_minutes[-1]) * 60 + margin + 1)
    index = (origin + pd.to_timedelta(seconds, unit="s")).as_unit("ns")
    positions = solar_position_frame(site, index)
    zenith = positions["zenith"].to_numpy()
    azimuth = positions["azimuth"].to_numpy()
    i_clr, _ = predict_clear_sky_array(scenario.clear_sky, zenith, site)

    visible = zenith < _HORIZON_GUARD_DEG
    sun_xy = np.full((len(seconds), 2), np.nan)
    sun_xy[visible] = sun_centers(camera, zenith[visible], azimuth[visible])
    occlusion = np.zeros(len(seconds))
    if clouds.count:
        centers = cloud_centers(clouds_origin, clouds.velocity, seconds[visible], width)
        occlusion[visible] = occlusion_fraction(sun_xy[visible], centers, clouds.radius_px, camera.mask_radius, width)
    kt = kt_from_occlusion(occlusion, clouds.opacity, scenario.kt_floor)
    ghi_true = kt * i_clr

    knot_pos = day_minutes * 60 - first
    if scenario.averaging is Averaging.BACKWARD:
        ghi = _window_means(ghi_true, knot_pos - scenario.window_s + 1, knot_pos + 1)
    elif scenario.averaging is Averaging.FORWARD:
        ghi = _window_means(ghi_true, knot_pos, knot_pos + scenario.window_s)
    else:
        ghi = ghi_true[knot_pos]
    dhi = scenario.kt_floor * i_clr[knot_pos]
    cos_zenith = np.cos(np.radians(zenith[knot_pos]))
    knots = pd.DataFrame(
        {"ghi": ghi, "dhi": dhi, "dni": np.clip((ghi - dhi) / cos_zenith, 0.0, None)},
        index=pd.DatetimeIndex(index[knot_pos], name=TIMESTAMP_COLUMN),
    )

    grid = np.arange(0, 86_400, scenario.image_interval_s)
    grid = grid[(grid >= day_minutes[0] * 60) & (grid <= day_minutes[-1] * 60)]
    grid = grid[zenith[grid - first] <= scenario.max_zenith]
    jitter = (
        rng.integers(0, scenario.capture_jitter_s + 1, size=grid.size)
        if scenario.capture_jitter_s
        else np.zeros(grid.size, dtype=int)
    )
    capture = grid + jitter
    drift = pd.Timedelta(seconds=round(scenario.drift_for(day_index)))
    renderer = SkyRenderer(camera, clouds)
    frame_clouds = cloud_centers(clouds_origin, clouds.velocity, capture, width)

    records: List[ManifestRecord] = []
    images: Dict[str, np.ndarray] = {}
    truth: Dict[str, float] = {}
    for k, second in enumerate(capture):
        pos = int(second - first)
        date_modified = index[pos]
        file_name = date_modified + drift
        ref = f"{site.name}/{filename_for(file_name, suffix='.png', utc_offset_s=scenario.filename_utc_offset_s)}"
        images[ref] = renderer.render(sun_xy[pos], frame_clouds[k])
        truth[ref] = float(ghi_true[pos])
        records.append(
            ManifestRecord(
                path=ref,
                ts_file_name=file_name,
                ts_date_modified=date_modified,
                exposure=scenario.exposure,
                site=site.name,
            )
        )
    kt_series = pd.Series(kt, index=pd.DatetimeIndex(index, name=TIMESTAMP_COLUMN), name="kt_true")
    _LOGGER.info(
        "Synthetic day %s: %d frames, %d irradiance knots, mean kt %.3f",
        (origin + pd.Timedelta(seconds=site.utc_offset)).date(),
        len(records),
        len(knots),
        float(kt[knot_pos].mean()),
    )
    return SyntheticDay(day_index, origin, clouds_origin, records, images, knots, kt_series, truth)


@dataclass(slots=True)
class SyntheticCorpus:
    scenario: SyntheticScenario
    manifest: ImageManifest
    images: Dict[str, np.ndarray]
    series: IrradianceSeries
    kt_true: pd.Series
    truth_ghi: Dict[str, float]
    origins: Tuple[pd.Timestamp, ...]
    clouds_origin: Tuple[np.ndarray, ...]
    _renderer: Optional[SkyRenderer] = None

    def truth_for(self, pairs: Sequence[AlignedPair]) -> np.ndarray:
        """True instantaneous GHI at each pair's capture instant."""

        try:
            return np.array([self.truth_ghi[pair.image_ref] for pair in pairs], dtype=float)
        except KeyError as exc:
            raise DataError(f"image {exc.args[0]!r} is not part of the synthetic corpus") from exc

    def render_at(self, instant: Any) -> np.ndarray:
        """Re-render the sky at any instant covered by the corpus days."""

        stamp = to_utc_timestamp(instant)
        for day, origin in enumerate(self.origins):
            elapsed = (stamp - origin).total_seconds()
            if 0 <= elapsed < 86_400:
                break
        else:
            raise DataError(f"{stamp} falls outside the synthetic corpus")
        scenario = self.scenario
        positions = solar_position_frame(scenario.site, [stamp])
        sun_xy = sun_centers(scenario.camera, positions["zenith"].to_numpy(), positions["azimuth"].to_numpy())[0]
        clouds = cloud_centers(
            self.clouds_origin[day], scenario.cloud_model.velocity, np.array([elapsed]), scenario.camera.width
        )[0]
        if self._renderer is None:
            self._renderer = SkyRenderer(scenario.camera, scenario.cloud_model)
        return self._renderer.render(sun_xy, clouds)

    def irradiance_frame(self) -> pd.DataFrame:
        frame = self.series.frame
        out = pd.DataFrame({TIMESTAMP_COLUMN: format_timestamps(frame.index)})
        for name in COMPONENTS:
            out[name] = frame[name].to_numpy()
        return out

    def kt_true_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {TIMESTAMP_COLUMN: format_timestamps(self.kt_true.index), "kt_true": self.kt_true.to_numpy()}
        )


def day_seeds(scenario: SyntheticScenario) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(scenario.seed).spawn(scenario.days)


def assemble(scenario: SyntheticScenario, days: Sequence[SyntheticDay]) -> SyntheticCorpus:
    ordered = sorted(days, key=lambda day: day.day_index)
    knots = [day.knots for day in ordered if len(day.knots)]
    frame = pd.concat(knots).sort_index() if knots else _empty_knots()
    truths = [day.kt_true for day in ordered if len(day.kt_true)]
    kt_true = pd.concat(truths).sort_index() if truths else pd.Series(dtype=float, name="kt_true")
    images: Dict[str, np.ndarray] = {}
    truth: Dict[str, float] = {}
    for day in ordered:
        images.update(day.images)
        truth.update(day.truth_ghi)
    return SyntheticCorpus(
        scenario=scenario,
        manifest=ImageManifest.from_records([record for day in ordered for record in day.records]),
        images=images,
        series=IrradianceSeries(
            site=scenario.site, frame=frame, native_interval=60.0, stages=(STAGE_SYNTHETIC,)
        ),
        kt_true=kt_true,
        truth_ghi=truth,
        origins=tuple(day.origin for day in ordered),
        clouds_origin=tuple(day.clouds_origin for day in ordered),
    )


def generate(scenario: SyntheticScenario) -> SyntheticCorpus:
    days = [generate_day(scenario, k, seed) for k, seed in enumerate(day_seeds(scenario))]
    return assemble(scenario, days)


class SyntheticOraclePredictor(VideoPredictor):
    """Video predictor that knows the true cloud motion and re-renders each future frame."""

    name = "oracle"

    def __init__(self, corpus: SyntheticCorpus) -> None:
        self._corpus = corpus

    def predict(self, sample: SequenceSample, frames: Mapping[str, np.ndarray]) -> np.ndarray:
        return np.stack([self._corpus.render_at(sample.t + pd.Timedelta(minutes=lead)) for lead in LEAD_MINUTES])


__all__ = [
    "Averaging",
    "CLOUD_RGB",
    "CloudModel",
    "SKY_RGB",
    "SUN_RGB",
    "SkyRenderer",
    "SyntheticCorpus",
    "SyntheticDay",
    "SyntheticOraclePredictor",
    "SyntheticScenario",
    "assemble",
    "cloud_centers",
    "day_seeds",
    "generate",
    "generate_day",
    "kt_from_occlusion",
    "occlusion_fraction",
]
