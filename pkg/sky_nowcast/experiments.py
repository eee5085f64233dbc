"""Δt cross-validation sweep and the ablation harnesses built on one fit/evaluate helper."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .alignment import AlignedPair, TimestampPolicy, TimestampSource, align, local_day
from .config import PipelineConfig, SiteConfig
from .errors import ConfigError, DataError
from .evaluation import EvaluationReport, metrics, stratify
from .imaging.manifest import ImageManifest
from .irradiance.pipeline import SplitRole, TimeShift, label_series
from .irradiance.series import IrradianceSeries
from .modeling.estimators import FrameBatch, LinearEstimator, design_matrix, fit_ridge, fit_ridge_arrays
from .modeling.targets import TargetKind, normalizers, targets
from .solar.clearsky import annotate_sky_conditions
from .splits import FoldAssignment, SplitSpec, stratified_group_kfold, thin_by_interval

_LOGGER = logging.getLogger(__name__)

DELTA_T_GRID: Tuple[int, ...] = (-30, -20, -10, 0, 10, 20, 30)
TARGET_LABELS: Tuple[str, ...] = ("ghi", "kt", "Kt", "kt_w", "Kt_w")
INTERVALS_MIN: Tuple[int, ...] = (1, 2, 3, 5, 10)


def annotate(series: IrradianceSeries, site: SiteConfig, config: PipelineConfig) -> IrradianceSeries:
    return annotate_sky_conditions(series, site.clear_sky, config.reno_window_s, config.reno)


def _in_test_years(pair: AlignedPair, site: SiteConfig) -> bool:
    return local_day(pair.instant, site.site).year in site.test_years


def align_with_shift(
    manifest: ImageManifest,
    annotated: IrradianceSeries,
    site: SiteConfig,
    config: PipelineConfig,
    delta_t: Optional[float] = None,
    policy: Optional[TimestampPolicy] = None,
) -> Tuple[List[AlignedPair], List[AlignedPair]]:
    """Training pairs use labels shifted by ``delta_t``; test pairs always use unshifted labels."""

    shift = site.delta_t if delta_t is None else TimeShift(delta_t)
    policy = policy or site.policy
    settings = config.irradiance
    test_labels = label_series(
        annotated, SplitRole.TEST, max_gap=settings.max_interp_gap_s, max_zenith=settings.max_zenith_deg
    )
    test_pairs = align(manifest, test_labels, policy, site.clear_sky).pairs
    if shift.is_identity:
        train_pairs = test_pairs
    else:
        train_labels = label_series(
            annotated,
            SplitRole.TRAIN,
            shift,
            max_gap=settings.max_interp_gap_s,
            max_zenith=settings.max_zenith_deg,
        )
        train_pairs = align(manifest, train_labels, policy, site.clear_sky).pairs
    train = [pair for pair in train_pairs if not _in_test_years(pair, site)]
    test = [pair for pair in test_pairs if _in_test_years(pair, site)]
    if not train or not test:
        raise ConfigError(
            f"Δt={shift.delta_t:+.0f}s leaves {len(train)} training and {len(test)} test pairs; both must be non-empty"
        )
    return train, test


def fit_and_evaluate(
    train: Sequence[AlignedPair],
    test: Sequence[AlignedPair],
    frames: Mapping[str, np.ndarray],
    site: SiteConfig,
    config: PipelineConfig,
    kind: Optional[TargetKind] = None,
    *,
    include_mask: Optional[bool] = None,
    truth: Optional[Mapping[str, float]] = None,
    label: str = "",
) -> Tuple[LinearEstimator, EvaluationReport]:
    """Ridge fit on ``train``, stratified report on ``test``; ``truth`` adds an oracle score."""

    kind = kind or config.target
    spec = config.ridge.feature_spec(site.camera, include_mask=include_mask)
    estimator = fit_ridge(train, frames, kind, config.ridge.alpha, spec)
    preds = estimator.estimate(FrameBatch.from_pairs(test, frames), [pair.ctx for pair in test])
    report = stratify(test, preds, site.site, dataset=site.name, model=label or f"ridge[{kind.label}]")
    if truth is not None:
        oracle = np.array([truth[pair.image_ref] for pair in test], dtype=float)
        report.extra["oracle"] = metrics(oracle, preds).to_dict()
    return estimator, report


def cross_validate(
    train: Sequence[AlignedPair],
    frames: Mapping[str, np.ndarray],
    folds: FoldAssignment,
    site: SiteConfig,
    config: PipelineConfig,
    kind: Optional[TargetKind] = None,
) -> np.ndarray:
    """Validation RMSE (W/m²) for each fold, fitting ridge on the remaining folds."""

    kind = kind or config.target
    spec = config.ridge.feature_spec(site.camera)
    design = design_matrix(FrameBatch.from_pairs(train, frames), spec)
    y = targets(train, kind)
    scale = normalizers([pair.ctx for pair in train], kind)
    sample_weight = scale**2 if kind.weighted else None
    ghi = np.array([pair.label_ghi for pair in train], dtype=float)
    fold_ids = np.array([folds.folds.get(local_day(pair.instant, site.site), -1) for pair in train])

    scores = []
    for fold in range(folds.k):
        validation = fold_ids == fold
        fitting = (fold_ids >= 0) & ~validation
        if not validation.any() or not fitting.any():
            continue
        weights, intercept = fit_ridge_arrays(
            design[fitting],
            y[fitting],
            config.ridge.alpha,
            None if sample_weight is None else sample_weight[fitting],
        )
        pred = (design[validation] @ weights + intercept) * scale[validation]
        scores.append(math.sqrt(float(np.mean((ghi[validation] - pred) ** 2))))
    if not scores:
        raise DataError("no fold produced a validation score")
    return np.array(scores)


@dataclass(frozen=True, slots=True)
class DeltaTScore:
    delta_t: float
    cv_rmse_mean: float
    cv_rmse_std: float
    n_train: int


@dataclass(slots=True)
class DeltaTSweepResult:
    scores: Tuple[DeltaTScore, ...]
    selected: float
    test_selected: EvaluationReport
    test_zero: EvaluationReport

    def score_of(self, delta_t: float) -> DeltaTScore:
        for score in self.scores:
            if score.delta_t == delta_t:
                return score
        raise KeyError(delta_t)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "delta-t",
            "selected_delta_t_s": self.selected,
            "cv": [
                {"delta_t_s": s.delta_t, "rmse_mean": s.cv_rmse_mean, "rmse_std": s.cv_rmse_std, "n_train": s.n_train}
                for s in self.scores
            ],
            "test_selected": self.test_selected.to_dict(),
            "test_zero": self.test_zero.to_dict(),
        }


def delta_t_sweep(
    manifest: ImageManifest,
    annotated: IrradianceSeries,
    site: SiteConfig,
    config: PipelineConfig,
    frames: Mapping[str, np.ndarray],
    *,
    grid: Iterable[float] = DELTA_T_GRID,
    seed: int = 0,
    truth: Optional[Mapping[str, float]] = None,
) -> DeltaTSweepResult:
    """Pick the training-label shift with the lowest mean cross-validated RMSE.

    Folds are drawn once, from the unshifted training pairs, so every shift is scored on
    the same day partition. Ties go to the smaller ``|Δt|``.
    """

    grid = sorted({float(value) for value in grid})
    if not grid:
        raise ConfigError("the Δt grid must not be empty")
    spec: SplitSpec = config.split_spec(site, seed)
    base_train, _ = align_with_shift(manifest, annotated, site, config, 0.0)
    folds = stratified_group_kfold(base_train, spec, site.site)

    scores: List[DeltaTScore] = []
    for delta_t in grid:
        train, _ = align_with_shift(manifest, annotated, site, config, delta_t)
        fold_rmse = cross_validate(train, frames, folds, site, config)
        std = float(np.std(fold_rmse, ddof=1)) if len(fold_rmse) > 1 else 0.0
        scores.append(DeltaTScore(delta_t, float(np.mean(fold_rmse)), std, len(train)))
        _LOGGER.info(
            "Δt=%+.0fs: CV RMSE %.2f ± %.2f over %d folds", delta_t, scores[-1].cv_rmse_mean, std, len(fold_rmse)
        )

    best = min(scores, key=lambda score: (round(score.cv_rmse_mean, 9), abs(score.delta_t), score.delta_t))
    train, test = align_with_shift(manifest, annotated, site, config, best.delta_t)
    _, selected_report = fit_and_evaluate(
        train, test, frames, site, config, truth=truth, label=f"ridge[Δt={best.delta_t:+.0f}s]"
    )
    zero_train, zero_test = align_with_shift(manifest, annotated, site, config, 0.0)
    _, zero_report = fit_and_evaluate(zero_train, zero_test, frames, site, config, truth=truth, label="ridge[Δt=+0s]")
    return DeltaTSweepResult(
        scores=tuple(scores), selected=best.delta_t, test_selected=selected_report, test_zero=zero_report
    )


@dataclass(slots=True)
class AblationResult:
    kind: str
    reports: Dict[str, EvaluationReport] = field(default_factory=dict)
    counts: Dict[str, int] = field(default_factory=dict)

    def rmse(self, variant: str) -> float:
        return self.reports[variant].overall.rmse

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "variants": {
                name: {**report.to_dict(), "n_train": self.counts.get(name)} for name, report in self.reports.items()
            },
        }


def policy_ablation(
    manifest: ImageManifest,
    annotated: IrradianceSeries,
    site: SiteConfig,
    config: PipelineConfig,
    frames: Mapping[str, np.ndarray],
    *,
    truth: Optional[Mapping[str, float]] = None,
) -> AblationResult:
    """File-name versus date-modified timestamps, each scored on labels aligned the same way."""

    result = AblationResult(kind="policy")
    for source in TimestampSource:
        policy = TimestampPolicy(source=source, max_fn_dm_gap=site.policy.max_fn_dm_gap)
        train, test = align_with_shift(manifest, annotated, site, config, policy=policy)
        _, report = fit_and_evaluate(train, test, frames, site, config, truth=truth, label=source.value)
        result.reports[source.value] = report
        result.counts[source.value] = len(train)
    return result


def target_ablation(
    train: Sequence[AlignedPair],
    test: Sequence[AlignedPair],
    frames: Mapping[str, np.ndarray],
    site: SiteConfig,
    config: PipelineConfig,
    labels: Iterable[str] = TARGET_LABELS,
    *,
    truth: Optional[Mapping[str, float]] = None,
) -> AblationResult:
    result = AblationResult(kind="target")
    for label in labels:
        kind = TargetKind.parse(label)
        _, report = fit_and_evaluate(train, test, frames, site, config, kind, truth=truth, label=kind.label)
        result.reports[kind.label] = report
        result.counts[kind.label] = len(train)
    return result


def interval_ablation(
    train: Sequence[AlignedPair],
    test: Sequence[AlignedPair],
    frames: Mapping[str, np.ndarray],
    site: SiteConfig,
    config: PipelineConfig,
    intervals: Iterable[int] = INTERVALS_MIN,
    *,
    truth: Optional[Mapping[str, float]] = None,
) -> AblationResult:
    """Thin the training set to one pair per interval; the test set is untouched."""

    result = AblationResult(kind="interval")
    for interval in intervals:
        thinned = thin_by_interval(train, interval, site.site)
        name = f"{interval}min"
        _, report = fit_and_evaluate(thinned, test, frames, site, config, truth=truth, label=name)
        result.reports[name] = report
        result.counts[name] = len(thinned)
    return result


def mask_ablation(
    train: Sequence[AlignedPair],
    test: Sequence[AlignedPair],
    frames: Mapping[str, np.ndarray],
    site: SiteConfig,
    config: PipelineConfig,
    *,
    truth: Optional[Mapping[str, float]] = None,
) -> AblationResult:
    result = AblationResult(kind="mask")
    for name, include in (("without_mask", False), ("with_mask", True)):
        _, report = fit_and_evaluate(train, test, frames, site, config, include_mask=include, truth=truth, label=name)
        result.reports[name] = report
        result.counts[name] = len(train)
    return result


__all__ = [
    "AblationResult",
    "DELTA_T_GRID",
    "DeltaTScore",
    "DeltaTSweepResult",
    "align_with_shift",
    "annotate",
    "cross_validate",
    "delta_t_sweep",
    "fit_and_evaluate",
    "interval_ablation",
    "mask_ablation",
    "policy_ablation",
    "target_ablation",
]
