"""Error metrics and stratified evaluation reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Final, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import mean_absolute_error, mean_squared_error

from .alignment import AlignedPair
from .errors import DataError, ShapeError
from .solar.clearsky import SkyCondition
from .solar.geometry import Site

SEASONS: Final[Tuple[str, ...]] = ("DJF", "MAM", "JJA", "SON")
_SEASON_OF_MONTH: Final[Dict[int, str]] = {
    12: "DJF", 1: "DJF", 2: "DJF",
    3: "MAM", 4: "MAM", 5: "MAM",
    6: "JJA", 7: "JJA", 8: "JJA",
    9: "SON", 10: "SON", 11: "SON",
}


class UndefinedMetricError(DataError):
    """Raised when a normalised metric has a zero denominator."""


@dataclass(frozen=True, slots=True)
class MetricSet:
    rmse: float
    mae: float
    nrmse: Optional[float]
    n: int

    def to_dict(self) -> Dict[str, Any]:
        return {"rmse": self.rmse, "mae": self.mae, "nrmse": self.nrmse, "n": self.n}


def metrics(truth: Sequence[float], pred: Sequence[float], *, strict: bool = True) -> MetricSet:
    """RMSE, MAE and nRMSE; a zero mean truth raises unless ``strict`` is off, which leaves nRMSE as ``None``."""

    truth_arr = np.asarray(truth, dtype=float)
    pred_arr = np.asarray(pred, dtype=float)
    if truth_arr.shape != pred_arr.shape:
        raise ShapeError("truth and prediction lengths differ")
    if truth_arr.size == 0:
        raise DataError("metrics need at least one sample")
    mean_truth = float(np.mean(truth_arr))
    if mean_truth == 0 and strict:
        raise UndefinedMetricError("nRMSE is undefined when the mean irradiance is zero")
    rmse = math.sqrt(mean_squared_error(truth_arr, pred_arr))
    mae = float(mean_absolute_error(truth_arr, pred_arr))
    nrmse = rmse / mean_truth if mean_truth != 0 else None
    return MetricSet(rmse=rmse, mae=mae, nrmse=nrmse, n=int(truth_arr.size))


@dataclass(slots=True)
class EvaluationReport:
    """Overall metrics plus sky, season and local-hour partitions; empty groups map to ``None``."""

    overall: MetricSet
    by_sky: Dict[str, Optional[MetricSet]]
    by_season: Dict[str, Optional[MetricSet]]
    by_hour: Dict[int, Optional[MetricSet]]
    dataset: str = ""
    model: str = ""
    extra: Dict[str, Any] = field(default_factory=dict)

    def partitions(self) -> Dict[str, Mapping[Any, Optional[MetricSet]]]:
        return {"sky": self.by_sky, "season": self.by_season, "hour": self.by_hour}

    def to_dict(self) -> Dict[str, Any]:
        def _group(values: Mapping[Any, Optional[MetricSet]]) -> Dict[str, Any]:
            return {str(key): (value.to_dict() if value else {"n": 0}) for key, value in values.items()}

        return {
            "dataset": self.dataset,
            "model": self.model,
            **self.overall.to_dict(),
            "sky": _group(self.by_sky),
            "season": _group(self.by_season),
            "hour": _group(self.by_hour),
            **({"extra": self.extra} if self.extra else {}),
        }

    def to_frame(self) -> pd.DataFrame:
        rows: List[Dict[str, Any]] = [{"partition": "all", "group": "all", **self.overall.to_dict()}]
        for partition, values in self.partitions().items():
            for key, value in values.items():
                row = {"partition": partition, "group": str(key)}
                row.update(value.to_dict() if value else {"rmse": np.nan, "mae": np.nan, "nrmse": np.nan, "n": 0})
                rows.append(row)
        return pd.DataFrame(rows, columns=["partition", "group", "rmse", "mae", "nrmse", "n"])


def _group_metrics(
    truth: np.ndarray, pred: np.ndarray, keys: np.ndarray, groups: Sequence[Any]
) -> Dict[Any, Optional[MetricSet]]:
    out: Dict[Any, Optional[MetricSet]] = {}
    for group in groups:
        selected = keys == group
        out[group] = metrics(truth[selected], pred[selected], strict=False) if selected.any() else None
    return out


def stratify(
    pairs: Sequence[AlignedPair],
    preds: Sequence[float],
    site: Site,
    flags: Optional[Sequence[SkyCondition]] = None,
    *,
    dataset: str = "",
    model: str = "",
) -> EvaluationReport:
    """Break metrics down by sky condition, meteorological season and local standard hour."""

    if len(preds) != len(pairs):
        raise ShapeError("one prediction is needed per pair")
    flags = [pair.sky_flag for pair in pairs] if flags is None else list(flags)
    if len(flags) != len(pairs):
        raise ShapeError("one sky flag is needed per pair")
    truth = np.array([pair.label_ghi for pair in pairs], dtype=float)
    pred = np.asarray(preds, dtype=float)
    local = pd.DatetimeIndex([pair.instant for pair in pairs]).tz_convert(None) + pd.Timedelta(seconds=site.utc_offset)
    sky = np.array([flag.value for flag in flags])
    season = np.array([_SEASON_OF_MONTH[month] for month in local.month])
    hour = np.asarray(local.hour)
    return EvaluationReport(
        overall=metrics(truth, pred),
        by_sky=_group_metrics(truth, pred, sky, [condition.value for condition in SkyCondition]),
        by_season=_group_metrics(truth, pred, season, SEASONS),
        by_hour=_group_metrics(truth, pred, hour, range(24)),
        dataset=dataset,
        model=model,
    )


def summarize_runs(runs: Sequence[MetricSet]) -> Dict[str, Dict[str, float]]:
    """Mean and sample standard deviation of each metric over repeated runs."""

    if not runs:
        raise DataError("summarize_runs needs at least one run")
    summary: Dict[str, Dict[str, float]] = {}
    for name in ("rmse", "mae", "nrmse"):
        values = np.array([getattr(run, name) for run in runs], dtype=float)
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        summary[name] = {"mean": float(np.mean(values)), "std": std}
    summary["runs"] = {"mean": float(len(runs)), "std": 0.0}
    return summary


def pool_reports(datasets: Mapping[str, Tuple[Sequence[float], Sequence[float]]]) -> Dict[str, MetricSet]:
    """Per-dataset metrics plus ``"pooled"`` metrics over the union of all samples."""

    if not datasets:
        raise DataError("pool_reports needs at least one dataset")
    out = {name: metrics(truth, pred) for name, (truth, pred) in datasets.items()}
    all_truth = np.concatenate([np.asarray(truth, dtype=float) for truth, _ in datasets.values()])
    all_pred = np.concatenate([np.asarray(pred, dtype=float) for _, pred in datasets.values()])
    out["pooled"] = metrics(all_truth, all_pred)
    return out


__all__ = [
    "EvaluationReport",
    "MetricSet",
    "SEASONS",
    "UndefinedMetricError",
    "metrics",
    "pool_reports",
    "stratify",
    "summarize_runs",
]
