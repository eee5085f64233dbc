import datetime as dt
import functools

import numpy as np
import pytest

from sky_nowcast.config import load_config
from sky_nowcast.errors import ConfigError
from sky_nowcast.experiments import (
    align_with_shift,
    annotate,
    cross_validate,
    delta_t_sweep,
    fit_and_evaluate,
    interval_ablation,
    mask_ablation,
    policy_ablation,
    target_ablation,
)
from sky_nowcast.solar.clearsky import SkyCondition
from sky_nowcast.splits import stratified_group_kfold
from sky_nowcast.synthetic import Averaging, CloudModel, SyntheticScenario, generate


@functools.lru_cache(maxsize=None)
def _corpus(name):
    site = load_config().site_config("synthetic")
    if name == "averaged":
        scenario = SyntheticScenario(
            site=site.site,
            start=dt.date(2018, 12, 25),
            days=10,
            cloud_model=CloudModel(count=3, radius_px=8.0, velocity=(4.0, 1.0)),
            averaging=Averaging.BACKWARD,
            window_s=60,
            seed=1,
        )
    elif name == "drifting":
        scenario = SyntheticScenario(
            site=site.site,
            start=dt.date(2018, 12, 28),
            days=6,
            cloud_model=CloudModel(count=2, radius_px=10.0, velocity=(2.0, 0.5)),
            drift_schedule=(90.0, 120.0, 150.0, 180.0),
            seed=2,
        )
    else:
        scenario = SyntheticScenario(
            site=site.site,
            start=dt.date(2018, 6, 21),
            days=12,
            day_stride=30,
            cloud_model=CloudModel(count=3, radius_px=8.0, velocity=(3.0, 1.0)),
            image_interval_s=300,
            seed=3,
        )
    return generate(scenario)


def _aligned(name, pipeline_config, synthetic_site):
    corpus = _corpus(name)
    annotated = annotate(corpus.series, synthetic_site, pipeline_config)
    return corpus, annotated


def test_align_with_shift_splits_by_test_year(pipeline_config, synthetic_site):
    corpus, annotated = _aligned("seasonal", pipeline_config, synthetic_site)
    train, test = align_with_shift(corpus.manifest, annotated, synthetic_site, pipeline_config)
    assert {pair.instant.year for pair in test} == {2019}
    assert all(pair.instant.year == 2018 for pair in train)
    shifted, unshifted_test = align_with_shift(corpus.manifest, annotated, synthetic_site, pipeline_config, -30.0)
    assert [pair.label_ghi for pair in unshifted_test] == [pair.label_ghi for pair in test]
    assert [pair.label_ghi for pair in shifted] != [pair.label_ghi for pair in train]


def test_fit_and_evaluate_adds_oracle_scores(pipeline_config, synthetic_site):
    corpus, annotated = _aligned("seasonal", pipeline_config, synthetic_site)
    train, test = align_with_shift(corpus.manifest, annotated, synthetic_site, pipeline_config)
    estimator, report = fit_and_evaluate(
        train, test, corpus.images, synthetic_site, pipeline_config, truth=corpus.truth_ghi
    )
    assert report.overall.n == len(test)
    assert report.extra["oracle"]["n"] == len(test)
    assert report.dataset == "synthetic"
    assert report.model == "ridge[kt]"
    assert estimator.target.label == "kt"


def test_cross_validate_scores_each_fold(pipeline_config, synthetic_site):
    corpus, annotated = _aligned("seasonal", pipeline_config, synthetic_site)
    train, _ = align_with_shift(corpus.manifest, annotated, synthetic_site, pipeline_config)
    spec = pipeline_config.split_spec(synthetic_site)
    folds = stratified_group_kfold(train, spec, synthetic_site.site)
    scores = cross_validate(train, corpus.images, folds, synthetic_site, pipeline_config)
    assert len(scores) == spec.k
    assert np.all(scores > 0)


def test_delta_t_sweep_finds_the_averaging_lag(pipeline_config, synthetic_site):
    corpus, annotated = _aligned("averaged", pipeline_config, synthetic_site)
    result = delta_t_sweep(
        corpus.manifest, annotated, synthetic_site, pipeline_config, corpus.images, truth=corpus.truth_ghi
    )
    assert len(result.scores) == 7
    assert result.selected in (-30.0, -20.0)
    assert result.score_of(result.selected).cv_rmse_mean <= result.score_of(0.0).cv_rmse_mean
    selected = result.test_selected.extra["oracle"]["rmse"]
    zero = result.test_zero.extra["oracle"]["rmse"]
    assert selected < zero
    payload = result.to_dict()
    assert payload["selected_delta_t_s"] == result.selected
    with pytest.raises(KeyError):
        result.score_of(45.0)


def test_delta_t_sweep_rejects_an_empty_grid(pipeline_config, synthetic_site):
    corpus, annotated = _aligned("seasonal", pipeline_config, synthetic_site)
    with pytest.raises(ConfigError):
        delta_t_sweep(corpus.manifest, annotated, synthetic_site, pipeline_config, corpus.images, grid=())


def test_policy_ablation_prefers_date_modified_under_drift(pipeline_config, synthetic_site):
    corpus, annotated = _aligned("drifting", pipeline_config, synthetic_site)
    result = policy_ablation(corpus.manifest, annotated, synthetic_site, pipeline_config, corpus.images)
    assert set(result.reports) == {"file_name", "date_modified"}
    assert result.rmse("date_modified") < result.rmse("file_name")
    fn, dm = result.reports["file_name"], result.reports["date_modified"]
    cloudy = SkyCondition.CLOUDY.value
    clear = SkyCondition.CLEAR.value
    assert fn.by_sky[cloudy].rmse - dm.by_sky[cloudy].rmse > fn.by_sky[clear].rmse - dm.by_sky[clear].rmse


def test_target_ablation_prefers_the_clear_sky_index(pipeline_config, synthetic_site):
    corpus, annotated = _aligned("seasonal", pipeline_config, synthetic_site)
    train, test = align_with_shift(corpus.manifest, annotated, synthetic_site, pipeline_config)
    labels = ("ghi", "kt", "kt_w")
    result = target_ablation(train, test, corpus.images, synthetic_site, pipeline_config, labels)
    assert set(result.reports) == {"ghi", "kt", "kt_w"}
    assert result.rmse("kt") < result.rmse("ghi")
    assert result.to_dict()["variants"]["kt"]["n_train"] == len(train)


def test_interval_and_mask_ablations(pipeline_config, synthetic_site):
    corpus, annotated = _aligned("seasonal", pipeline_config, synthetic_site)
    train, test = align_with_shift(corpus.manifest, annotated, synthetic_site, pipeline_config)
    intervals = interval_ablation(train, test, corpus.images, synthetic_site, pipeline_config, intervals=(5, 10))
    assert intervals.counts["10min"] <= intervals.counts["5min"] == len(train)
    masks = mask_ablation(train, test, corpus.images, synthetic_site, pipeline_config)
    assert set(masks.reports) == {"without_mask", "with_mask"}
    assert all(np.isfinite(masks.rmse(name)) for name in masks.reports)
