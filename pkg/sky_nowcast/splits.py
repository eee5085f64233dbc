"""Year-based train/test splits, stratified-group K-fold and sample-interval thinning."""

from __future__ import annotations

import datetime as dt
import logging
import warnings
from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.model_selection import StratifiedGroupKFold

from .alignment import AlignedPair, local_day
from .errors import ConfigError
from .solar.clearsky import SkyCondition
from .solar.geometry import Site

_LOGGER = logging.getLogger(__name__)

IRRADIANCE_CEILING = 1367.0
BALANCE_TOLERANCE = 0.2
MAX_REBALANCE_PASSES = 50


@dataclass(frozen=True, slots=True)
class SplitSpec:
    test_years: FrozenSet[int]
    k: int = 5
    n_bins: int = 14
    bin_width: float = 100.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ConfigError("fold count k must be >= 2")
        if self.n_bins < 1 or self.bin_width <= 0:
            raise ConfigError("stratification needs at least one bin of positive width")
        if self.n_bins * self.bin_width < IRRADIANCE_CEILING:
            raise ConfigError(f"stratification bins must cover [0, {IRRADIANCE_CEILING:.0f})")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    @classmethod
    def from_mapping(cls, payload: Mapping[str, Any], test_years: Iterable[int], seed: int = 0) -> "SplitSpec":
        unknown = set(payload) - {"k", "n_bins", "bin_width_wm2"}
        if unknown:
            raise ConfigError(f"Unknown split keys: {', '.join(sorted(unknown))}")
        try:
            return cls(
                test_years=frozenset(int(year) for year in test_years),
                k=int(payload.get("k", 5)),
                n_bins=int(payload.get("n_bins", 14)),
                bin_width=float(payload.get("bin_width_wm2", 100.0)),
                seed=seed,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("split settings must be numeric") from exc

    def bin_of(self, ghi: np.ndarray) -> np.ndarray:
        bins = np.floor(np.asarray(ghi, dtype=float) / self.bin_width).astype(int)
        return np.clip(bins, 0, self.n_bins - 1)


@dataclass(frozen=True, slots=True)
class SplitResult:
    train: Tuple[AlignedPair, ...]
    test: Tuple[AlignedPair, ...]
    test_clear: Tuple[AlignedPair, ...]
    test_cloudy: Tuple[AlignedPair, ...]

    def counts(self) -> Dict[str, Any]:
        def _by_sky(pairs: Sequence[AlignedPair]) -> Dict[str, int]:
            clear = sum(1 for pair in pairs if pair.sky_flag is SkyCondition.CLEAR)
            return {"all": len(pairs), "clear": clear, "cloudy": len(pairs) - clear}

        return {"train": _by_sky(self.train), "test": _by_sky(self.test)}


@dataclass(frozen=True, slots=True)
class FoldAssignment:
    folds: Mapping[dt.date, int]
    k: int
    imbalance: float = 0.0

    @property
    def balanced(self) -> bool:
        return self.imbalance <= BALANCE_TOLERANCE

    def fold_of(self, day: dt.date) -> int:
        return self.folds[day]

    def days_in(self, fold: int) -> List[dt.date]:
        return sorted(day for day, index in self.folds.items() if index == fold)

    def to_frame(self) -> pd.DataFrame:
        days = sorted(self.folds)
        return pd.DataFrame({"day": [day.isoformat() for day in days], "fold": [self.folds[day] for day in days]})


def _year(pair: AlignedPair, site: Site) -> int:
    return local_day(pair.instant, site).year


def split_train_test(pairs: Sequence[AlignedPair], spec: SplitSpec, site: Site) -> SplitResult:
    test = tuple(pair for pair in pairs if _year(pair, site) in spec.test_years)
    train = tuple(pair for pair in pairs if _year(pair, site) not in spec.test_years)
    if not test:
        raise ConfigError(f"no samples fall in test years {sorted(spec.test_years)}")
    if not train:
        raise ConfigError("every sample falls in a test year; the pairs must span at least two years")
    clear = tuple(pair for pair in test if pair.sky_flag is SkyCondition.CLEAR)
    cloudy = tuple(pair for pair in test if pair.sky_flag is SkyCondition.CLOUDY)
    _LOGGER.info("Split %d train / %d test (%d clear, %d cloudy)", len(train), len(test), len(clear), len(cloudy))
    return SplitResult(train=train, test=test, test_clear=clear, test_cloudy=cloudy)


def _fold_counts(histograms: np.ndarray, folds: np.ndarray, k: int) -> np.ndarray:
    counts = np.zeros((k, histograms.shape[1]))
    np.add.at(counts, folds, histograms)
    return counts


def fold_imbalance(histograms: np.ndarray, folds: np.ndarray, k: int) -> float:
    """Worst relative gap between a fold's bin fraction and the global bin fraction.

    ``histograms`` holds one row of per-bin sample counts per day; empty bins are ignored.
    """

    counts = _fold_counts(histograms, folds, k)
    total = counts.sum(axis=0)
    share = total / total.sum()
    populated = share > 0
    sizes = np.maximum(counts.sum(axis=1, keepdims=True), 1.0)
    fractions = counts[:, populated] / sizes
    return float(np.max(np.abs(fractions / share[populated] - 1.0)))


def _rebalance(histograms: np.ndarray, folds: np.ndarray, k: int, tolerance: float) -> np.ndarray:
    """Greedy day moves and swaps, largest day first, that shrink the squared relative bin error."""

    folds = folds.copy()
    counts = _fold_counts(histograms, folds, k)
    expected = counts.sum(axis=0) / k
    weights = np.divide(1.0, expected**2, out=np.zeros_like(expected), where=expected > 0)
    members = np.bincount(folds, minlength=k)
    order = sorted(range(len(folds)), key=lambda day: (-histograms[day].sum(), day))

    def cost(rows: np.ndarray) -> np.ndarray:
        return ((rows - expected) ** 2 * weights).sum(axis=-1)

    for _ in range(MAX_REBALANCE_PASSES):
        if fold_imbalance(histograms, folds, k) <= tolerance:
            break
        improved = False
        for day in order:
            source = int(folds[day])
            day_counts = histograms[day]
            base = cost(counts)
            move = np.full(k, np.inf)
            if members[source] > 1:
                move = cost(counts[source] - day_counts) - base[source] + cost(counts + day_counts) - base
                move[source] = np.inf
            delta = histograms - day_counts
            swap = cost(counts[source] + delta) - base[source] + cost(counts[folds] - delta) - base[folds]
            swap[folds == source] = np.inf
            target, other = int(np.argmin(move)), int(np.argmin(swap))
            if min(move[target], swap[other]) >= -1e-12:
                continue
            improved = True
            if move[target] <= swap[other]:
                counts[source] -= day_counts
                counts[target] += day_counts
                members[source] -= 1
                members[target] += 1
                folds[day] = target
            else:
                target = int(folds[other])
                counts[source] += delta[other]
                counts[target] -= delta[other]
                folds[day], folds[other] = target, source
        if not improved:
            break
    return folds


def stratified_group_kfold(train: Sequence[AlignedPair], spec: SplitSpec, site: Site) -> FoldAssignment:
    """Assign whole site-local days to folds, balancing the irradiance histogram across folds.

    The scikit-learn assignment is kept when every fold's bin fractions lie within
    ``BALANCE_TOLERANCE`` of the global ones; otherwise days are moved between folds until they
    do, and an assignment that still misses the tolerance is logged as unbalanced.
    """

    days = [local_day(pair.instant, site) for pair in train]
    distinct = sorted(set(days))
    if len(distinct) < spec.k:
        raise ConfigError(f"{len(distinct)} training days cannot fill {spec.k} folds")
    labels = spec.bin_of(np.array([pair.label_ghi for pair in train]))
    groups = np.array([day.toordinal() for day in days])
    splitter = StratifiedGroupKFold(n_splits=spec.k, shuffle=True, random_state=spec.seed)
    position = {day.toordinal(): index for index, day in enumerate(distinct)}
    folds = np.zeros(len(distinct), dtype=int)
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="The least populated class", category=UserWarning)
        for fold, (_, validation) in enumerate(splitter.split(np.zeros(len(train)), labels, groups)):
            for ordinal in np.unique(groups[validation]):
                folds[position[int(ordinal)]] = fold
    histograms = np.zeros((len(distinct), spec.n_bins))
    np.add.at(histograms, (np.array([position[ordinal] for ordinal in groups]), labels), 1.0)
    imbalance = fold_imbalance(histograms, folds, spec.k)
    if imbalance > BALANCE_TOLERANCE:
        _LOGGER.info("Rebalancing folds: worst bin deviates %.1f%% from the global histogram", 100 * imbalance)
        folds = _rebalance(histograms, folds, spec.k, BALANCE_TOLERANCE)
        imbalance = fold_imbalance(histograms, folds, spec.k)
        if imbalance > BALANCE_TOLERANCE:
            _LOGGER.warning(
                "Fold assignment rejected as unbalanced: worst bin deviates %.1f%% (tolerance %.0f%%) over %d days",
                100 * imbalance,
                100 * BALANCE_TOLERANCE,
                len(distinct),
            )
    return FoldAssignment(
        folds={day: int(fold) for day, fold in zip(distinct, folds)},
        k=spec.k,
        imbalance=imbalance,
    )


def thin_by_interval(train: Sequence[AlignedPair], interval: int, site: Site) -> List[AlignedPair]:
    """Keep the earliest pair of each ``interval``-minute bucket of each local day."""

    if interval < 1:
        raise ConfigError("thinning interval must be >= 1 minute")
    kept: Dict[Tuple[dt.date, int], AlignedPair] = {}
    for pair in sorted(train, key=lambda item: (item.instant, item.image_ref)):
        local = pair.instant.tz_convert(None) + pd.Timedelta(seconds=site.utc_offset)
        bucket = (local.hour * 60 + local.minute) // interval
        kept.setdefault((local.date(), bucket), pair)
    return sorted(kept.values(), key=lambda item: (item.instant, item.image_ref))


__all__ = [
    "BALANCE_TOLERANCE",
    "FoldAssignment",
    "SplitResult",
    "SplitSpec",
    "fold_imbalance",
    "split_train_test",
    "stratified_group_kfold",
    "thin_by_interval",
]
