"""Configuration loading for the sky-image nowcasting pipeline."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Final, FrozenSet, Mapping, Optional

from .alignment import TimestampPolicy
from .errors import ConfigError
from .imaging.image import DEFAULT_OUT_WIDTH, Exposure, RoiSpec
from .imaging.sunmask import CameraModel
from .irradiance.pipeline import (
    DEFAULT_MAX_GAP_S,
    DEFAULT_MAX_ZENITH_DEG,
    DEFAULT_MEDIAN_TOLERANCE,
    TimeShift,
)
from .modeling.estimators import FeatureSpec
from .modeling.schedule import TrainingSchedule
from .modeling.targets import TargetKind
from .solar.clearsky import DEFAULT_WINDOW_S, ClearSkyModel, RenoThresholds
from .solar.geometry import DEFAULT_SOLAR_CONSTANT, Site, SolarConstant
from .splits import SplitSpec

DEFAULT_CONFIG_PATH: Final[Path] = Path(__file__).resolve().parent.parent / "config" / "pipeline.json"
CONFIG_ENV: Final[str] = "SKY_NOWCAST_CONFIG"
JOBS_ENV: Final[str] = "SKY_NOWCAST_JOBS"

_TOP_LEVEL_KEYS: Final = frozenset(
    {
        "default_site",
        "solar_constant",
        "image",
        "irradiance",
        "reno",
        "split",
        "target",
        "training",
        "ridge",
        "external_predictor",
        "sites",
    }
)
_SITE_KEYS: Final = frozenset(
    {
        "site",
        "roi",
        "camera",
        "timestamp_policy",
        "delta_t_s",
        "test_years",
        "clear_sky",
        "exposure",
        "filename_utc_offset_s",
    }
)


@dataclass(frozen=True, slots=True)
class SiteConfig:
    """Everything the pipeline needs to know about one camera site."""

    site: Site
    roi: RoiSpec
    camera: CameraModel
    policy: TimestampPolicy
    delta_t: TimeShift
    test_years: FrozenSet[int]
    clear_sky: ClearSkyModel
    exposure: Optional[Exposure] = None
    filename_utc_offset_s: int = 0

    @property
    def name(self) -> str:
        return self.site.name


@dataclass(frozen=True, slots=True)
class IrradianceSettings:
    max_interp_gap_s: float = DEFAULT_MAX_GAP_S
    max_zenith_deg: float = DEFAULT_MAX_ZENITH_DEG
    median_tolerance_wm2: float = DEFAULT_MEDIAN_TOLERANCE


@dataclass(frozen=True, slots=True)
class RidgeSettings:
    alpha: float = 1.0
    feature_width: int = 16
    include_cos_zenith: bool = True
    include_mask: bool = False

    def feature_spec(self, camera: Optional[CameraModel] = None, *, include_mask: Optional[bool] = None) -> FeatureSpec:
        return FeatureSpec(
            pool_width=self.feature_width,
            include_mask=self.include_mask if include_mask is None else include_mask,
            include_cos_zenith=self.include_cos_zenith,
            camera=camera,
        )


@dataclass(frozen=True, slots=True)
class ExternalPredictorSchema:
    """Settings handed to an outside video model; nothing in this package consumes them."""

    patch_size: int = 16
    embed_dim: int = 256
    n_patches: int = 64
    batch: int = 16


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    sites: Mapping[str, SiteConfig]
    default_site: str
    solar_constant: SolarConstant
    image_out_width: int
    irradiance: IrradianceSettings
    reno: RenoThresholds
    reno_window_s: float
    split: Mapping[str, Any]
    target: TargetKind
    training: TrainingSchedule
    ridge: RidgeSettings
    external_predictor: ExternalPredictorSchema

    def site_config(self, name: Optional[str] = None) -> SiteConfig:
        key = name or self.default_site
        try:
            return self.sites[key]
        except KeyError as exc:
            raise ConfigError(f"Unknown site '{key}'; configured sites: {', '.join(sorted(self.sites))}") from exc

    def split_spec(self, site: SiteConfig, seed: int = 0) -> SplitSpec:
        return SplitSpec.from_mapping(self.split, test_years=site.test_years, seed=seed)


def _parse_positive_int(name: str, default: int, minimum: int = 0) -> int:
    raw = os.getenv(name)
    if raw is None:
        return max(default, minimum)
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"Environment variable '{name}' must be an integer") from exc
    if value < minimum:
        raise ConfigError(f"Environment variable '{name}' must be >= {minimum}")
    return value


def default_jobs() -> int:
    return _parse_positive_int(JOBS_ENV, os.cpu_count() or 1, minimum=1)


def resolve_config_path(path: Optional[str | Path] = None) -> Path:
    if path:
        return Path(path)
    env_path = os.getenv(CONFIG_ENV)
    return Path(env_path) if env_path else DEFAULT_CONFIG_PATH


def _section(payload: Mapping[str, Any], key: str, allowed: FrozenSet[str] | set[str]) -> Dict[str, Any]:
    value = payload.get(key, {})
    if not isinstance(value, Mapping):
        raise ConfigError(f"'{key}' must be an object")
    unknown = set(value) - set(allowed)
    if unknown:
        raise ConfigError(f"Unknown keys in '{key}': {', '.join(sorted(unknown))}")
    return dict(value)


def _number(section: Mapping[str, Any], key: str, default: float, where: str) -> float:
    try:
        return float(section.get(key, default))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{where}.{key}' must be a number") from exc


def _parse_site(key: str, entry: Any, solar_constant: SolarConstant, out_width: int) -> SiteConfig:
    if not isinstance(entry, Mapping):
        raise ConfigError(f"Site '{key}' must be an object")
    unknown = set(entry) - _SITE_KEYS
    if unknown:
        raise ConfigError(f"Unknown keys in site '{key}': {', '.join(sorted(unknown))}")
    for required in ("site", "roi", "camera"):
        if required not in entry:
            raise ConfigError(f"Site '{key}' is missing '{required}'")
    site_payload = dict(entry["site"])
    site_payload.setdefault("name", key)
    exposure_raw = entry.get("exposure")
    try:
        exposure = Exposure(str(exposure_raw).lower()) if exposure_raw else None
    except ValueError as exc:
        raise ConfigError(f"Site '{key}' has an unknown exposure '{exposure_raw}'") from exc
    test_years = entry.get("test_years", [])
    if not isinstance(test_years, list) or not all(isinstance(year, int) for year in test_years):
        raise ConfigError(f"Site '{key}' test_years must be a list of integers")
    try:
        delta_t = TimeShift(float(entry.get("delta_t_s", 0.0)))
        filename_offset = int(entry.get("filename_utc_offset_s", 0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Site '{key}' delta_t_s and filename_utc_offset_s must be numbers") from exc
    return SiteConfig(
        site=Site.from_mapping(site_payload),
        roi=RoiSpec.from_mapping(entry["roi"]),
        camera=CameraModel.from_mapping(entry["camera"], width=out_width),
        policy=TimestampPolicy.from_mapping(entry.get("timestamp_policy", {})),
        delta_t=delta_t,
        test_years=frozenset(test_years),
        clear_sky=ClearSkyModel.from_mapping(entry.get("clear_sky", {}), solar_constant),
        exposure=exposure,
        filename_utc_offset_s=filename_offset,
    )


def parse_config(payload: Any) -> PipelineConfig:
    """Validate a decoded configuration document; every unknown key is an error."""

    if not isinstance(payload, Mapping):
        raise ConfigError("Configuration must be a JSON object")
    unknown = set(payload) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {', '.join(sorted(unknown))}")

    solar_constant = SolarConstant(_number(payload, "solar_constant", DEFAULT_SOLAR_CONSTANT, "config"))
    image = _section(payload, "image", {"out_width"})
    out_width = int(_number(image, "out_width", DEFAULT_OUT_WIDTH, "image"))
    if out_width <= 0:
        raise ConfigError("'image.out_width' must be > 0")

    irradiance_section = _section(
        payload, "irradiance", {"max_interp_gap_s", "max_zenith_deg", "median_tolerance_wm2"}
    )
    irradiance = IrradianceSettings(
        max_interp_gap_s=_number(irradiance_section, "max_interp_gap_s", DEFAULT_MAX_GAP_S, "irradiance"),
        max_zenith_deg=_number(irradiance_section, "max_zenith_deg", DEFAULT_MAX_ZENITH_DEG, "irradiance"),
        median_tolerance_wm2=_number(
            irradiance_section, "median_tolerance_wm2", DEFAULT_MEDIAN_TOLERANCE, "irradiance"
        ),
    )
    if irradiance.max_interp_gap_s <= 0 or not 0 < irradiance.max_zenith_deg < 90:
        raise ConfigError("irradiance gap must be > 0 and max zenith within (0, 90)")

    threshold_keys = set(RenoThresholds.__dataclass_fields__)
    reno_section = _section(payload, "reno", threshold_keys | {"window_s"})
    reno_window = _number(reno_section, "window_s", DEFAULT_WINDOW_S, "reno")
    reno_section.pop("window_s", None)
    try:
        reno = RenoThresholds(
            **{
                key: (int(value) if key == "max_iterations" else float(value))
                for key, value in reno_section.items()
            }
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError("'reno' thresholds must be numbers") from exc

    split = _section(payload, "split", {"k", "n_bins", "bin_width_wm2"})
    SplitSpec.from_mapping(split, test_years=())

    target = TargetKind.parse(str(payload.get("target", "kt")))
    training = TrainingSchedule.from_mapping(_section(payload, "training", set(TrainingSchedule.__dataclass_fields__)))

    ridge_section = _section(payload, "ridge", {"alpha", "feature_width", "include_cos_zenith", "include_mask"})
    ridge = RidgeSettings(
        alpha=_number(ridge_section, "alpha", 1.0, "ridge"),
        feature_width=int(_number(ridge_section, "feature_width", 16, "ridge")),
        include_cos_zenith=bool(ridge_section.get("include_cos_zenith", True)),
        include_mask=bool(ridge_section.get("include_mask", False)),
    )
    if ridge.alpha < 0 or ridge.feature_width < 1 or out_width % ridge.feature_width:
        raise ConfigError("ridge alpha must be >= 0 and feature_width must divide image.out_width")

    external_section = _section(payload, "external_predictor", {"patch_size", "embed_dim", "n_patches", "batch"})
    external_defaults = {"patch_size": 16, "embed_dim": 256, "n_patches": 64, "batch": 16}
    external = ExternalPredictorSchema(
        **{
            key: int(_number(external_section, key, default, "external_predictor"))
            for key, default in external_defaults.items()
        }
    )

    sites_payload = payload.get("sites")
    if not isinstance(sites_payload, Mapping) or not sites_payload:
        raise ConfigError("Configuration must define at least one site under 'sites'")
    sites = {
        str(key): _parse_site(str(key), entry, solar_constant, out_width) for key, entry in sites_payload.items()
    }
    default_site = str(payload.get("default_site") or next(iter(sites)))
    if default_site not in sites:
        raise ConfigError(f"default_site '{default_site}' is not a configured site")

    return PipelineConfig(
        sites=sites,
        default_site=default_site,
        solar_constant=solar_constant,
        image_out_width=out_width,
        irradiance=irradiance,
        reno=reno,
        reno_window_s=reno_window,
        split=split,
        target=target,
        training=training,
        ridge=ridge,
        external_predictor=external,
    )


def load_config(path: Optional[str | Path] = None) -> PipelineConfig:
    config_path = resolve_config_path(path)
    if not config_path.exists():
        raise ConfigError(f"Config file '{config_path}' does not exist")
    try:
        payload = json.loads(config_path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file '{config_path}' must be valid JSON") from exc
    return parse_config(payload)


__all__ = [
    "CONFIG_ENV",
    "DEFAULT_CONFIG_PATH",
    "ExternalPredictorSchema",
    "IrradianceSettings",
    "JOBS_ENV",
    "PipelineConfig",
    "RidgeSettings",
    "SiteConfig",
    "default_jobs",
    "load_config",
    "parse_config",
    "resolve_config_path",
]
