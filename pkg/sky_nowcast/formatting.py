"""Helpers for turning reports into terminal-friendly text."""

from __future__ import annotations

import math
from typing import Any, Iterable, Mapping, Optional, Sequence

from .evaluation import EvaluationReport, MetricSet
from .nowcasting import ForecastReport


def _format_value(value: Optional[float], digits: int = 2) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    return f"{value:,.{digits}f}"


def _format_metric(metric: Optional[MetricSet]) -> str:
    if metric is None:
        return "n=0"
    return (
        f"RMSE {_format_value(metric.rmse)} W/m² · MAE {_format_value(metric.mae)} W/m² · "
        f"nRMSE {_format_value(None if metric.nrmse is None else metric.nrmse * 100, 1)}% · n={metric.n}"
    )


def format_report(report: EvaluationReport) -> str:
    header = f"📊 {report.model or 'estimator'}"
    if report.dataset:
        header += f" on {report.dataset}"
    lines = [header, f"All: {_format_metric(report.overall)}"]
    for sky, metric in report.by_sky.items():
        lines.append(f"{str(sky).capitalize()}: {_format_metric(metric)}")
    seasons = [
        f"{season} {_format_value(metric.rmse) if metric else 'n/a'}" for season, metric in report.by_season.items()
    ]
    if seasons:
        lines.append("Season RMSE: " + ", ".join(seasons))
    oracle = report.extra.get("oracle") if report.extra else None
    if oracle:
        lines.append(f"Against true GHI: RMSE {_format_value(oracle.get('rmse'))} W/m²")
    return "\n".join(lines)


def format_forecast(report: ForecastReport) -> str:
    lines = [f"🔭 {report.model or 'forecast'}"]
    for score in report.leads:
        lines.append(
            f"+{score.lead_min:>2} min: RMSE {_format_value(score.rmse)} W/m² "
            f"(SPM {_format_value(score.rmse_spm)}) FS {_format_value(score.fs, 3)} n={score.n}"
        )
    if len(lines) == 1:
        lines.append("No lead had a complete sample.")
    return "\n".join(lines)


def format_counts(title: str, counts: Mapping[str, Any]) -> str:
    lines = [title]
    lines.extend(f"{key}: {value}" for key, value in counts.items())
    return "\n".join(lines)


def format_sweep(rows: Iterable[Mapping[str, Any]], selected: float) -> str:
    lines = ["⏱️ Label shift sweep"]
    for row in rows:
        marker = " ←" if row["delta_t_s"] == selected else ""
        lines.append(
            f"Δt {row['delta_t_s']:+.0f}s: CV RMSE {_format_value(row['rmse_mean'])} "
            f"± {_format_value(row['rmse_std'])}{marker}"
        )
    return "\n".join(lines)


def format_ablation(kind: str, variants: Sequence[tuple[str, EvaluationReport]]) -> str:
    lines = [f"🧪 {kind} ablation"]
    for name, report in variants:
        lines.append(f"{name}: {_format_metric(report.overall)}")
    return "\n".join(lines)


__all__ = [
    "format_ablation",
    "format_counts",
    "format_forecast",
    "format_report",
    "format_sweep",
]
