"""Model commands: fit, evaluate, forecast and experiment."""

from __future__ import annotations

import argparse
import asyncio
import logging
from functools import partial
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..alignment import AlignedPair
from ..errors import DataError
from ..evaluation import metrics, pool_reports, stratify, summarize_runs
from ..experiments import (
    DELTA_T_GRID,
    INTERVALS_MIN,
    TARGET_LABELS,
    align_with_shift,
    delta_t_sweep,
    interval_ablation,
    mask_ablation,
    policy_ablation,
    target_ablation,
)
from ..formatting import format_ablation, format_forecast, format_report, format_sweep
from ..irradiance.series import read_series
from ..modeling.estimators import (
    Estimator,
    ExternalEstimator,
    FrameBatch,
    fit_linear_sgd,
    fit_ridge,
    load_estimator,
    save_estimator,
)
from ..modeling.targets import TargetKind
from ..nowcasting import (
    ExternalPredictor,
    FrozenPersistence,
    GroundTruthPassthrough,
    PersistKt,
    VideoPredictor,
    build_sequences,
    evaluate_forecasts,
    forecasts_to_frame,
    run_single_step,
    run_spm,
    run_two_step,
    target_instants,
    truth_matrix,
)
from . import (
    ESTIMATOR_JSON,
    IRRADIANCE_CSV,
    PAIRS_TEST_CSV,
    PAIRS_TRAIN_CSV,
    CommandContext,
    CommandError,
    csv_floats,
)

_LOGGER = logging.getLogger(__name__)

EXPERIMENT_KINDS = ("delta-t", "policy", "target", "interval", "mask", "seeds")
PREDICTORS = ("frozen", "ground-truth", "external")


def _target_kind(ctx: CommandContext, label: Optional[str]) -> TargetKind:
    return TargetKind.parse(label) if label else ctx.config.target


def _load_estimator(ctx: CommandContext, external: Optional[str], label: Optional[str]) -> Estimator:
    if external:
        return ExternalEstimator.read_csv(external, _target_kind(ctx, label))
    return load_estimator(ctx.store.path(ESTIMATOR_JSON))


def _model_label(estimator: Estimator) -> str:
    return f"{getattr(estimator, 'kind', 'external')}[{estimator.target.label}]"


# fit


async def fit(ctx: CommandContext, args: argparse.Namespace) -> None:
    train = ctx.read_pairs(PAIRS_TRAIN_CSV)
    if not train:
        raise DataError("pairs_train.csv holds no pairs; run split first")
    frames = ctx.frames([pair.image_ref for pair in train])
    kind = _target_kind(ctx, args.target)
    spec = ctx.config.ridge.feature_spec(ctx.site.camera, include_mask=True if args.with_mask else None)
    if args.model == "ridge":
        estimator = await asyncio.to_thread(fit_ridge, train, frames, kind, ctx.config.ridge.alpha, spec)
    else:
        schedule = ctx.config.training
        estimator = await asyncio.to_thread(
            fit_linear_sgd, train, frames, kind, schedule, schedule.weight_decay, spec, ctx.seed
        )
    if ctx.dry_run:
        print(f"🧮 Fitted {_model_label(estimator)} on {len(train)} pairs (dry run, nothing saved)")
        return
    save_estimator(estimator, ctx.store.path(ESTIMATOR_JSON))
    print(f"🧮 Fitted {_model_label(estimator)} on {len(train)} pairs")


# evaluate


def _read_predictions(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    frame = pd.read_csv(path)
    if not {"ghi", "ghi_hat"} <= set(frame.columns):
        raise DataError(f"{path}: predictions need 'ghi' and 'ghi_hat' columns")
    return frame["ghi"].to_numpy(dtype=float), frame["ghi_hat"].to_numpy(dtype=float)


async def evaluate(ctx: CommandContext, args: argparse.Namespace) -> None:
    site = ctx.site
    test = ctx.read_pairs(PAIRS_TEST_CSV)
    if not test:
        raise DataError("pairs_test.csv holds no pairs; run split first")
    if args.truth_as_prediction:
        preds = np.array([pair.label_ghi for pair in test], dtype=float)
        label = "truth"
    else:
        estimator = _load_estimator(ctx, args.external, args.target)
        frames = ctx.frames([pair.image_ref for pair in test])
        batch = FrameBatch.from_pairs(test, frames)
        preds = await asyncio.to_thread(estimator.estimate, batch, [pair.ctx for pair in test])
        label = _model_label(estimator)
    report = stratify(test, preds, site.site, dataset=site.name, model=label)
    predictions = pd.DataFrame(
        {
            "image_path": [pair.image_ref for pair in test],
            "instant_utc": [pair.instant.strftime("%Y-%m-%dT%H:%M:%SZ") for pair in test],
            "sky_condition": [pair.sky_flag.value for pair in test],
            "ghi": [pair.label_ghi for pair in test],
            "ghi_hat": preds,
        }
    )
    pooled = None
    if args.pool:
        datasets: Dict[str, Tuple[np.ndarray, np.ndarray]] = {site.name: (predictions["ghi"].to_numpy(), preds)}
        for other in args.pool:
            other_dir = Path(other)
            datasets[other_dir.name] = _read_predictions(other_dir / "predictions.csv")
        pooled = {name: value.to_dict() for name, value in pool_reports(datasets).items()}
    print(format_report(report))
    if ctx.dry_run:
        return
    await ctx.store.write_json("report.json", report.to_dict())
    await ctx.store.write_csv("report.csv", report.to_frame())
    await ctx.store.write_csv("predictions.csv", predictions)
    if pooled is not None:
        await ctx.store.write_json("report_pooled.json", pooled)


# forecast


def _predictor(name: str, frames_csv: Optional[str]) -> VideoPredictor:
    if name == "frozen":
        return FrozenPersistence()
    if name == "ground-truth":
        return GroundTruthPassthrough()
    if not frames_csv:
        raise CommandError("--predictor external needs --frames-csv")
    return ExternalPredictor.read_csv(frames_csv)


async def forecast(ctx: CommandContext, args: argparse.Namespace) -> None:
    site = ctx.site
    test = ctx.read_pairs(PAIRS_TEST_CSV)
    frames = ctx.frames([pair.image_ref for pair in test])
    samples = build_sequences(
        test, site.site, frames=frames, odd_days_only=args.odd_days, tolerance_s=args.tolerance
    )
    if not samples:
        raise DataError("no complete 10-frame sequence in the test pairs")
    estimator = load_estimator(ctx.store.path(ESTIMATOR_JSON))
    predictor = _predictor(args.predictor, args.frames_csv)

    truth = truth_matrix(samples)
    baseline = run_spm(samples)
    two_step = await asyncio.to_thread(
        run_two_step, samples, predictor, estimator, frames, ctx.config.image_out_width
    )
    single_step = await asyncio.to_thread(run_single_step, samples, PersistKt(), frames)
    instants = target_instants(samples)
    two_step_report = evaluate_forecasts(
        truth, two_step, baseline, model=f"{predictor.name}+{_model_label(estimator)}", instants=instants
    )
    single_report = evaluate_forecasts(truth, single_step, baseline, model=PersistKt.name, instants=instants)
    print(format_forecast(two_step_report))
    print(format_forecast(single_report))
    if ctx.dry_run:
        return
    await ctx.store.write_csv("forecast.csv", forecasts_to_frame(samples, two_step))
    await ctx.store.write_csv("forecast_spm.csv", forecasts_to_frame(samples, baseline))
    await ctx.store.write_csv("forecast_single_step.csv", forecasts_to_frame(samples, single_step))
    await ctx.store.write_json(
        "forecast_report.json",
        {"samples": len(samples), "two_step": two_step_report.to_dict(), "single_step": single_report.to_dict()},
    )


# experiment


def _read_truth(path: Optional[str]) -> Optional[Dict[str, float]]:
    if not path:
        return None
    frame = pd.read_csv(path, dtype={"image_path": str})
    if not {"image_path", "ghi_true"} <= set(frame.columns):
        raise DataError(f"{path}: truth table needs 'image_path' and 'ghi_true' columns")
    return dict(zip(frame["image_path"], frame["ghi_true"].astype(float)))


def _seed_runs(
    ctx: CommandContext,
    train: Sequence[AlignedPair],
    test: Sequence[AlignedPair],
    frames: Mapping[str, np.ndarray],
    repeats: int,
) -> Dict[str, object]:
    schedule = ctx.config.training
    spec = ctx.config.ridge.feature_spec(ctx.site.camera)
    truth = np.array([pair.label_ghi for pair in test], dtype=float)
    batch = FrameBatch.from_pairs(test, frames)
    contexts = [pair.ctx for pair in test]
    runs = []
    for offset in range(repeats):
        estimator = fit_linear_sgd(
            train, frames, ctx.config.target, schedule, schedule.weight_decay, spec, ctx.seed + offset
        )
        runs.append(metrics(truth, estimator.estimate(batch, contexts)))
    return {
        "kind": "seeds",
        "runs": [run.to_dict() for run in runs],
        "summary": summarize_runs(runs),
    }


async def experiment(ctx: CommandContext, args: argparse.Namespace) -> None:
    site, config = ctx.site, ctx.config
    manifest = ctx.read_images()
    annotated = read_series(ctx.store.path(IRRADIANCE_CSV), site.site)
    frames = ctx.frames(list(manifest.frame["path"]))
    truth = _read_truth(args.truth)
    kind = args.kind

    if kind == "delta-t":
        grid = csv_floats(args.grid) or DELTA_T_GRID
        result = await asyncio.to_thread(
            partial(delta_t_sweep, manifest, annotated, site, config, frames, grid=grid, seed=ctx.seed, truth=truth)
        )
        payload = result.to_dict()
        print(format_sweep(payload["cv"], result.selected))
        print(format_report(result.test_selected))
        print(format_report(result.test_zero))
    elif kind == "policy":
        result = await asyncio.to_thread(
            partial(policy_ablation, manifest, annotated, site, config, frames, truth=truth)
        )
        payload = result.to_dict()
        print(format_ablation(kind, list(result.reports.items())))
    else:
        train, test = await asyncio.to_thread(align_with_shift, manifest, annotated, site, config)
        if kind == "seeds":
            payload = await asyncio.to_thread(_seed_runs, ctx, train, test, frames, args.repeats)
            rmse = payload["summary"]["rmse"]
            print(f"🎲 {args.repeats} seeded runs: RMSE {rmse['mean']:.2f} ± {rmse['std']:.2f}")
        else:
            if kind == "target":
                labels = [label.strip() for label in args.targets.split(",")] if args.targets else TARGET_LABELS
                work = partial(target_ablation, train, test, frames, site, config, labels, truth=truth)
            elif kind == "interval":
                intervals = [int(value) for value in csv_floats(args.intervals)] or list(INTERVALS_MIN)
                work = partial(interval_ablation, train, test, frames, site, config, intervals, truth=truth)
            else:
                work = partial(mask_ablation, train, test, frames, site, config, truth=truth)
            result = await asyncio.to_thread(work)
            payload = result.to_dict()
            print(format_ablation(kind, list(result.reports.items())))
    if ctx.dry_run:
        return
    await ctx.store.write_json(f"experiment_{kind}.json", payload)


def register(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]") -> None:
    parser = subparsers.add_parser("fit", help="Fit an estimator on the training pairs")
    parser.add_argument("--model", choices=("ridge", "sgd"), default="ridge")
    parser.add_argument("--target", default=None, help="ghi, kt or Kt, with _w for the weighted loss")
    parser.add_argument("--with-mask", action="store_true", help="add the sun-mask channel to the features")
    parser.set_defaults(handler=fit)

    parser = subparsers.add_parser("evaluate", help="Score an estimator on the test pairs")
    parser.add_argument("--truth-as-prediction", action="store_true", help="score the labels against themselves")
    parser.add_argument("--external", default=None, help="CSV of image_path,y_hat produced outside this package")
    parser.add_argument("--target", default=None, help="target of the external predictions")
    parser.add_argument("--pool", nargs="*", default=None, help="other run directories to pool predictions with")
    parser.set_defaults(handler=evaluate)

    parser = subparsers.add_parser("forecast", help="Two-step nowcasts against smart persistence")
    parser.add_argument("--predictor", choices=PREDICTORS, default="frozen")
    parser.add_argument("--frames-csv", default=None, help="listing of externally predicted frames")
    parser.add_argument("--odd-days", action="store_true", help="only anchor samples on odd days of the month")
    parser.add_argument("--tolerance", type=float, default=0.0, help="seconds of slack when matching frames")
    parser.set_defaults(handler=forecast)

    parser = subparsers.add_parser("experiment", help="Label-shift sweep and ablations")
    parser.add_argument("--kind", choices=EXPERIMENT_KINDS, required=True)
    parser.add_argument("--truth", default=None, help="CSV of image_path,ghi_true for oracle scores")
    parser.add_argument("--grid", default=None, help="comma-separated Δt values in seconds")
    parser.add_argument("--targets", default=None, help="comma-separated target labels")
    parser.add_argument("--intervals", default=None, help="comma-separated thinning intervals in minutes")
    parser.add_argument("--repeats", type=int, default=5, help="seeded runs for --kind seeds")
    parser.set_defaults(handler=experiment)


__all__ = ["EXPERIMENT_KINDS", "evaluate", "experiment", "fit", "forecast", "register"]
