import math

import numpy as np
import pytest

from sky_nowcast.errors import DataError, ShapeError
from sky_nowcast.evaluation import (
    SEASONS,
    UndefinedMetricError,
    metrics,
    pool_reports,
    stratify,
    summarize_runs,
)
from sky_nowcast.formatting import format_report
from sky_nowcast.solar.clearsky import SkyCondition


def test_metric_identities_hold_on_random_samples():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        size = int(rng.integers(1, 50))
        truth = rng.uniform(1.0, 1000.0, size)
        pred = truth + rng.normal(0.0, 50.0, size)
        result = metrics(truth, pred)
        assert result.rmse >= result.mae - 1e-9
        assert result.nrmse * np.mean(truth) == pytest.approx(result.rmse)
        assert result.n == size
        assert metrics(truth, truth).rmse == 0.0


def test_metrics_known_values():
    result = metrics([100.0, 300.0], [110.0, 270.0])
    assert result.rmse == pytest.approx(math.sqrt((100.0 + 900.0) / 2))
    assert result.mae == pytest.approx(20.0)
    assert result.nrmse == pytest.approx(result.rmse / 200.0)
    assert result.to_dict()["n"] == 2


def test_metrics_input_checks():
    with pytest.raises(ShapeError):
        metrics([1.0, 2.0], [1.0])
    with pytest.raises(DataError):
        metrics([], [])
    with pytest.raises(UndefinedMetricError):
        metrics([0.0, 0.0], [1.0, 1.0])


def test_stratify_partitions(make_pair, paris):
    pairs = [
        make_pair(ref="a", instant="2019-01-10T10:30:00Z", ghi=100.0, sky=SkyCondition.CLEAR),
        make_pair(ref="b", instant="2019-07-10T10:30:00Z", ghi=500.0, sky=SkyCondition.CLOUDY),
        make_pair(ref="c", instant="2019-07-10T13:10:00Z", ghi=700.0, sky=SkyCondition.CLOUDY),
    ]
    report = stratify(pairs, [110.0, 480.0, 700.0], paris, dataset="synthetic", model="ridge")
    assert report.overall.n == 3
    assert report.by_sky["clear"].rmse == pytest.approx(10.0)
    assert report.by_sky["cloudy"].n == 2
    assert set(report.by_season) == set(SEASONS)
    assert report.by_season["DJF"].n == 1
    assert report.by_season["MAM"] is None
    # local standard hour at UTC+1
    assert report.by_hour[11].n == 2
    assert report.by_hour[14].mae == pytest.approx(0.0)
    assert report.by_hour[10] is None
    payload = report.to_dict()
    assert payload["dataset"] == "synthetic"
    assert payload["season"]["SON"] == {"n": 0}
    frame = report.to_frame()
    assert len(frame) == 1 + 2 + 4 + 24
    assert frame.iloc[0]["partition"] == "all"


def test_stratify_honours_override_flags(make_pair, paris):
    pairs = [make_pair(ref="a"), make_pair(ref="b")]
    flags = [SkyCondition.CLOUDY, SkyCondition.CLOUDY]
    report = stratify(pairs, [300.0, 310.0], paris, flags)
    assert report.by_sky["clear"] is None
    assert report.by_sky["cloudy"].n == 2
    with pytest.raises(ShapeError):
        stratify(pairs, [1.0], paris)
    with pytest.raises(ShapeError):
        stratify(pairs, [1.0, 2.0], paris, flags[:1])


def test_zero_mean_subgroup_keeps_errors_without_nrmse(make_pair, paris):
    pairs = [
        make_pair(ref="night", instant="2019-01-10T03:30:00Z", ghi=0.0, sky=SkyCondition.CLOUDY),
        make_pair(ref="noon", instant="2019-01-10T11:30:00Z", ghi=300.0, sky=SkyCondition.CLEAR),
    ]
    report = stratify(pairs, [4.0, 290.0], paris)
    night = report.by_hour[4]
    assert (night.rmse, night.mae, night.nrmse, night.n) == (4.0, 4.0, None, 1)
    assert report.by_sky["cloudy"].nrmse is None
    assert report.overall.nrmse == pytest.approx(report.overall.rmse / 150.0)
    assert report.to_dict()["hour"]["4"]["nrmse"] is None
    frame = report.to_frame()
    assert frame[(frame["partition"] == "hour") & (frame["group"] == "4")]["nrmse"].isna().all()
    assert "nRMSE n/a%" in format_report(report)
    with pytest.raises(UndefinedMetricError):
        metrics([0.0], [4.0])


def test_summarize_runs():
    runs = [metrics([100.0], [110.0]), metrics([100.0], [130.0])]
    summary = summarize_runs(runs)
    assert summary["rmse"]["mean"] == pytest.approx(20.0)
    assert summary["rmse"]["std"] == pytest.approx(math.sqrt(200.0))
    assert summary["runs"]["mean"] == 2.0
    assert summarize_runs(runs[:1])["mae"]["std"] == 0.0
    with pytest.raises(DataError):
        summarize_runs([])


def test_pool_reports():
    pooled = pool_reports({"a": ([100.0], [110.0]), "b": ([300.0, 300.0], [300.0, 330.0])})
    assert set(pooled) == {"a", "b", "pooled"}
    assert pooled["pooled"].n == 3
    assert pooled["pooled"].rmse == pytest.approx(math.sqrt((100.0 + 0.0 + 900.0) / 3))
    with pytest.raises(DataError):
        pool_reports({})
