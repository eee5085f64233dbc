"""Data preparation commands: synth, ingest, process, align and split."""

from __future__ import annotations

import argparse
import asyncio
import datetime as dt
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..alignment import (
    AlignedPair,
    AlignmentResult,
    align,
    drift_report,
    drift_to_frame,
    dropped_to_frame,
    local_day,
    pairs_to_frame,
)
from ..errors import ConfigError, DataError
from ..experiments import annotate
from ..formatting import format_counts
from ..imaging.image import Exposure, SkyImage, decode_image, encode_png, mean_image, process_image
from ..imaging.manifest import ImageManifest, ManifestRecord, parse_filename_timestamp
from ..infra.store import IngestEntry, file_sha1
from ..irradiance.pipeline import SplitRole, TimeShift, derive_dni, fuse_sensors, label_series
from ..irradiance.series import (
    is_multi_sensor,
    read_measurements,
    read_series,
    series_from_measurements,
    series_to_csv_frame,
)
from ..splits import split_train_test, stratified_group_kfold, thin_by_interval
from ..synthetic import Averaging, CloudModel, SyntheticScenario, assemble, day_seeds, generate_day
from . import (
    IMAGES_CSV,
    IRRADIANCE_CSV,
    IRRADIANCE_RAW_CSV,
    MANIFEST_CSV,
    PAIRS_CSV,
    PAIRS_TEST_CSV,
    PAIRS_TRAIN_CSV,
    REJECTS_CSV,
    CommandContext,
    CommandError,
    csv_floats,
)

_LOGGER = logging.getLogger(__name__)

IMAGE_SUFFIXES = frozenset({".png", ".jpg", ".jpeg"})
UNDATED = "undated"


def _exposure_of(path: Path) -> Exposure:
    return Exposure.SHORT if "short" in path.stem.lower() else Exposure.LONG


def _date_arg(raw: str) -> dt.date:
    try:
        return dt.date.fromisoformat(raw)
    except ValueError as exc:
        raise CommandError(f"expected a YYYY-MM-DD date, got '{raw}'") from exc


def _local_key(instant: Optional[pd.Timestamp], utc_offset_s: int) -> str:
    if instant is None or pd.isna(instant):
        return UNDATED
    return (instant.tz_convert(None) + pd.Timedelta(seconds=utc_offset_s)).date().isoformat()


# synth


async def synth(ctx: CommandContext, args: argparse.Namespace) -> None:
    site = ctx.site
    camera = site.camera
    if not site.roi.fits(camera.width, camera.width):
        raise ConfigError(
            f"site '{site.name}' ROI does not fit {camera.width}-px synthetic frames; use the synthetic site"
        )
    velocity = csv_floats(args.velocity)
    if len(velocity) != 2:
        raise CommandError("--velocity takes two numbers: vx,vy in px/min")
    scenario = SyntheticScenario(
        site=site.site,
        start=_date_arg(args.start),
        days=args.days,
        day_stride=args.day_stride,
        cloud_model=CloudModel(
            count=args.clouds, radius_px=args.cloud_radius, velocity=(velocity[0], velocity[1]), opacity=args.opacity
        ),
        drift_schedule=csv_floats(args.drift),
        averaging=Averaging(args.averaging),
        window_s=args.window,
        seed=ctx.seed,
        camera=camera,
        clear_sky=site.clear_sky,
        image_interval_s=args.interval,
        capture_jitter_s=args.jitter,
        exposure=Exposure(args.exposure),
        filename_utc_offset_s=site.filename_utc_offset_s,
    )
    seeds = day_seeds(scenario)
    days = await ctx.scheduler.run(list(range(scenario.days)), lambda k: generate_day(scenario, k, seeds[k]))
    corpus = assemble(scenario, days)
    counts = {"frames": len(corpus.manifest), "irradiance_knots": len(corpus.series), "days": scenario.days}
    if ctx.dry_run:
        _LOGGER.info("Dry run: would write %s under %s", counts, ctx.store.path("raw"))
        print(format_counts("🌤️ Synthetic corpus (dry run)", counts))
        return

    raw_dir = ctx.store.path("raw")

    def _write_frames() -> None:
        for record in corpus.manifest:
            target = raw_dir / record.path
            target.parent.mkdir(parents=True, exist_ok=True)
            encode_png(corpus.images[record.path], target)
            stamp = record.ts_date_modified.timestamp()
            os.utime(target, (stamp, stamp))

    await asyncio.to_thread(_write_frames)
    await ctx.store.write_csv("raw/irradiance.csv", corpus.irradiance_frame())
    await ctx.store.write_csv("raw/kt_true.csv", corpus.kt_true_frame())
    truth = pd.DataFrame(
        {"image_path": list(corpus.truth_ghi), "ghi_true": [corpus.truth_ghi[ref] for ref in corpus.truth_ghi]}
    )
    await ctx.store.write_csv("raw/truth_ghi.csv", truth.sort_values("image_path"))
    await ctx.store.write_json("raw/scenario.json", scenario.to_dict())
    _LOGGER.info("Synthetic corpus written to %s: %s", raw_dir, counts)
    print(format_counts("🌤️ Synthetic corpus", counts))


# ingest


@dataclass(slots=True)
class _IngestBatch:
    records: List[ManifestRecord] = field(default_factory=list)
    rejects: List[Dict[str, str]] = field(default_factory=list)
    entries: Dict[str, IngestEntry] = field(default_factory=dict)
    reused: int = 0


def _inspect(
    paths: Sequence[Path], root: Path, index: Dict[str, IngestEntry], site_name: str, fn_offset_s: int
) -> _IngestBatch:
    batch = _IngestBatch()
    for path in paths:
        rel = path.relative_to(root).as_posix()
        stat = path.stat()
        previous = index.get(rel)
        if previous is not None and previous.size == stat.st_size and previous.mtime == stat.st_mtime:
            sha1 = previous.sha1
            batch.reused += 1
        else:
            try:
                decode_image(path)
            except DataError as exc:
                _LOGGER.warning("Rejected %s: %s", rel, exc)
                batch.rejects.append({"path": rel, "reason": str(exc)})
                continue
            sha1 = file_sha1(path)
        batch.entries[rel] = IngestEntry(path=rel, sha1=sha1, mtime=stat.st_mtime, size=stat.st_size)
        batch.records.append(
            ManifestRecord(
                path=rel,
                ts_file_name=parse_filename_timestamp(path.name, fn_offset_s),
                ts_date_modified=pd.Timestamp(stat.st_mtime_ns, unit="ns", tz="UTC"),
                exposure=_exposure_of(path),
                site=site_name,
            )
        )
    return batch


async def ingest(ctx: CommandContext, args: argparse.Namespace) -> None:
    site = ctx.site
    root = Path(args.images)
    if not root.is_dir():
        raise DataError(f"image directory {root} does not exist")
    paths = sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        _LOGGER.warning("No images found under %s", root)

    groups: Dict[str, List[Path]] = defaultdict(list)
    for path in paths:
        stamp = pd.Timestamp(path.stat().st_mtime_ns, unit="ns", tz="UTC")
        groups[_local_key(stamp, site.site.utc_offset)].append(path)
    index = ctx.store.load_ingest_index()
    days = sorted(groups)
    batches = await ctx.scheduler.run(
        days, lambda day: _inspect(groups[day], root, index, site.name, site.filename_utc_offset_s)
    )
    records = [record for batch in batches for record in batch.records]
    rejects = [reject for batch in batches for reject in batch.rejects]
    entries = {key: entry for batch in batches for key, entry in batch.entries.items()}

    manifest = ImageManifest.from_records(records)
    exposure = Exposure(args.exposure) if args.exposure else site.exposure
    if exposure is not None:
        manifest = manifest.with_exposure(exposure)

    raw = read_measurements(args.irradiance)
    if is_multi_sensor(raw):
        series = fuse_sensors(raw, site.site, ctx.config.irradiance.median_tolerance_wm2)
    else:
        series = series_from_measurements(site.site, raw)
    if args.derive_dni:
        series = derive_dni(series, ctx.config.irradiance.max_zenith_deg)
    if len(series) == 0:
        _LOGGER.warning("Irradiance file %s holds no samples", args.irradiance)

    counts = {
        "images": len(manifest),
        "rejected": len(rejects),
        "unchanged": sum(batch.reused for batch in batches),
        "irradiance_samples": len(series),
    }
    if ctx.dry_run:
        print(format_counts("📥 Ingest (dry run)", counts))
        return
    await ctx.store.write_csv(MANIFEST_CSV, manifest.to_csv_frame())
    await ctx.store.write_csv(IRRADIANCE_RAW_CSV, series_to_csv_frame(series))
    await ctx.store.write_csv(REJECTS_CSV, pd.DataFrame(rejects, columns=["path", "reason"]))
    await ctx.store.save_ingest_index(entries, root=root)
    _LOGGER.info("Ingested %s", counts)
    print(format_counts("📥 Ingest", counts))


# process


@dataclass(slots=True)
class _ProcessBatch:
    done: List[str] = field(default_factory=list)
    failed: List[Dict[str, str]] = field(default_factory=list)
    mean: Optional[np.ndarray] = None
    count: int = 0


def _process_day(
    ctx: CommandContext, records: Sequence[ManifestRecord], root: Path, keep_mean: bool
) -> _ProcessBatch:
    batch = _ProcessBatch()
    raw_frames: List[np.ndarray] = []
    for record in records:
        try:
            pixels = decode_image(root / record.path)
        except DataError as exc:
            _LOGGER.warning("Skipping %s: %s", record.path, exc)
            batch.failed.append({"path": record.path, "reason": str(exc)})
            continue
        image = SkyImage(
            pixels=pixels,
            ts_file_name=record.ts_file_name,
            ts_date_modified=record.ts_date_modified,
            exposure=record.exposure,
            site=record.site,
            ref=record.path,
        )
        processed = process_image(image, ctx.site.roi, ctx.config.image_out_width)
        if not ctx.dry_run:
            ctx.store.save_tensor(record.path, processed.pixels)
        if keep_mean:
            raw_frames.append(pixels)
        batch.done.append(record.path)
    if keep_mean and raw_frames:
        batch.mean = mean_image(raw_frames)
        batch.count = len(raw_frames)
    return batch


async def process(ctx: CommandContext, args: argparse.Namespace) -> None:
    site = ctx.site
    manifest = ImageManifest.read_csv(ctx.store.path(MANIFEST_CSV)) if ctx.store.exists(MANIFEST_CSV) else None
    if manifest is None:
        raise DataError(f"{ctx.store.path(MANIFEST_CSV)} does not exist; run ingest first")
    root = ctx.store.ingest_root()
    column = site.policy.source.column
    groups: Dict[str, List[ManifestRecord]] = defaultdict(list)
    for record in manifest:
        stamp = getattr(record, column) or record.ts_date_modified or record.ts_file_name
        groups[_local_key(stamp, site.site.utc_offset)].append(record)
    days = sorted(groups)
    batches = await ctx.scheduler.run(days, lambda day: _process_day(ctx, groups[day], root, args.mean_image))
    done = {ref for batch in batches for ref in batch.done}
    failed = [item for batch in batches for item in batch.failed]

    series = read_series(ctx.store.path(IRRADIANCE_RAW_CSV), site.site)
    annotated = await asyncio.to_thread(annotate, series, site, ctx.config)
    clear = int(annotated.frame["clear"].sum()) if len(annotated) else 0
    counts = {"tensors": len(done), "failed": len(failed), "irradiance_samples": len(annotated), "clear_samples": clear}
    if ctx.dry_run:
        print(format_counts("🖼️ Process (dry run)", counts))
        return
    processed = ImageManifest(manifest.frame.loc[manifest.frame["path"].isin(done)])
    await ctx.store.write_csv(IMAGES_CSV, processed.to_csv_frame())
    await ctx.store.write_csv(IRRADIANCE_CSV, series_to_csv_frame(annotated))
    if failed:
        await ctx.store.write_csv("process_failures.csv", pd.DataFrame(failed, columns=["path", "reason"]))
    if args.mean_image:
        weighted = [(batch.mean, batch.count) for batch in batches if batch.mean is not None]
        if weighted:
            mean = np.average(np.stack([m for m, _ in weighted]), axis=0, weights=[n for _, n in weighted])
            encode_png(np.clip(np.rint(mean), 0, 255).astype(np.uint8), ctx.store.path("mean_image.png"))
    _LOGGER.info("Processed %s", counts)
    print(format_counts("🖼️ Process", counts))


# align


def _split_by_year(pairs: Sequence[AlignedPair], ctx: CommandContext, test: bool) -> List[AlignedPair]:
    years = ctx.site.test_years
    return [pair for pair in pairs if (local_day(pair.instant, ctx.site.site).year in years) is test]


async def align_command(ctx: CommandContext, args: argparse.Namespace) -> None:
    site = ctx.site
    settings = ctx.config.irradiance
    manifest = ctx.read_images()
    series = read_series(ctx.store.path(IRRADIANCE_CSV), site.site)
    if not series.has_sky_conditions:
        raise DataError(f"{ctx.store.path(IRRADIANCE_CSV)} lacks sky conditions; re-run process")

    def _align(role: SplitRole) -> AlignmentResult:
        shift = site.delta_t if role is SplitRole.TRAIN else TimeShift()
        labels = label_series(
            series,
            role,
            shift,
            max_gap=settings.max_interp_gap_s,
            max_zenith=settings.max_zenith_deg,
        )
        return align(manifest, labels, site.policy, site.clear_sky)

    unshifted = await asyncio.to_thread(_align, SplitRole.TEST)
    if site.delta_t.is_identity:
        pairs = list(unshifted.pairs)
        dropped = list(unshifted.dropped)
    else:
        shifted = await asyncio.to_thread(_align, SplitRole.TRAIN)
        pairs = _split_by_year(shifted.pairs, ctx, test=False) + _split_by_year(unshifted.pairs, ctx, test=True)
        pairs.sort(key=lambda pair: (pair.instant, pair.image_ref))

        def _is_test(instant: Optional[pd.Timestamp]) -> bool:
            return instant is None or local_day(instant, site.site).year in site.test_years

        dropped = [item for item in unshifted.dropped if _is_test(item.instant)]
        dropped += [item for item in shifted.dropped if not _is_test(item.instant)]
    drift = drift_report(manifest, site.site.utc_offset)
    counts = {"pairs": len(pairs), "dropped": len(dropped), "delta_t_s": site.delta_t.delta_t, "days": len(drift)}
    if not pairs:
        _LOGGER.warning("Alignment produced no pairs for %s", site.name)
    if ctx.dry_run:
        print(format_counts("🔗 Align (dry run)", counts))
        return
    await ctx.store.write_csv(PAIRS_CSV, pairs_to_frame(pairs))
    await ctx.store.write_csv("alignment_drops.csv", dropped_to_frame(dropped))
    await ctx.store.write_csv("drift.csv", drift_to_frame(drift))
    print(format_counts("🔗 Align", counts))


# split


async def split(ctx: CommandContext, args: argparse.Namespace) -> None:
    site = ctx.site
    pairs = ctx.read_pairs(PAIRS_CSV)
    if not pairs:
        raise DataError("pairs.csv holds no pairs; nothing to split")
    spec = ctx.config.split_spec(site, ctx.seed)
    result = split_train_test(pairs, spec, site.site)
    train: Sequence[AlignedPair] = result.train
    if args.interval > 1:
        train = thin_by_interval(train, args.interval, site.site)
    folds = stratified_group_kfold(train, spec, site.site) if train else None
    summary = {
        "seed": ctx.seed,
        "k": spec.k,
        "test_years": sorted(spec.test_years),
        "interval_min": args.interval,
        "counts": result.counts(),
        "n_train": len(train),
        "fold_imbalance": folds.imbalance if folds is not None else None,
    }
    if ctx.dry_run:
        print(format_counts("✂️ Split (dry run)", {"train": len(train), "test": len(result.test)}))
        return
    await ctx.store.write_csv(PAIRS_TRAIN_CSV, pairs_to_frame(train))
    await ctx.store.write_csv(PAIRS_TEST_CSV, pairs_to_frame(result.test))
    folds_frame = folds.to_frame() if folds is not None else pd.DataFrame(columns=["day", "fold"])
    await ctx.store.write_csv("folds.csv", folds_frame)
    await ctx.store.write_json("splits.json", summary)
    print(format_counts("✂️ Split", {"train": len(train), "test": len(result.test), "folds": spec.k}))


def register(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]") -> None:
    parser = subparsers.add_parser("synth", help="Render a synthetic sky-image corpus")
    parser.add_argument("--start", default="2018-12-25", help="first local day (YYYY-MM-DD)")
    parser.add_argument("--days", type=int, default=2)
    parser.add_argument("--day-stride", type=int, default=1)
    parser.add_argument("--clouds", type=int, default=2)
    parser.add_argument("--cloud-radius", type=float, default=8.0)
    parser.add_argument("--velocity", default="2,0", help="cloud velocity vx,vy in px/min")
    parser.add_argument("--opacity", type=float, default=1.0)
    parser.add_argument("--drift", default="", help="comma-separated FN−DM seconds, one per day (cycled)")
    parser.add_argument("--averaging", choices=[mode.value for mode in Averaging], default=Averaging.NONE.value)
    parser.add_argument("--window", type=int, default=60, help="irradiance averaging window in seconds")
    parser.add_argument("--interval", type=int, default=60, help="seconds between frames")
    parser.add_argument("--jitter", type=int, default=0, help="maximum capture jitter in seconds")
    parser.add_argument("--exposure", choices=[e.value for e in Exposure], default=Exposure.LONG.value)
    parser.set_defaults(handler=synth)

    parser = subparsers.add_parser("ingest", help="Index raw images and irradiance measurements")
    parser.add_argument("--images", required=True, help="directory of sky images")
    parser.add_argument("--irradiance", required=True, help="measurement CSV")
    parser.add_argument("--exposure", choices=[e.value for e in Exposure], default=None)
    parser.add_argument("--derive-dni", action="store_true", help="back-compute DNI from GHI and DHI")
    parser.set_defaults(handler=ingest)

    parser = subparsers.add_parser("process", help="Crop, resize and tensorise images; flag clear-sky periods")
    parser.add_argument("--mean-image", action="store_true", help="also write the mean raw frame")
    parser.set_defaults(handler=process)

    parser = subparsers.add_parser("align", help="Pair images with 1-s irradiance labels")
    parser.set_defaults(handler=align_command)

    parser = subparsers.add_parser("split", help="Year-based train/test split and day folds")
    parser.add_argument("--interval", type=int, default=1, help="keep one training pair per N minutes")
    parser.set_defaults(handler=split)


__all__ = ["align_command", "ingest", "process", "register", "split", "synth"]
