import numpy as np
import pandas as pd
import pytest

from sky_nowcast.errors import ConfigError, DataError
from sky_nowcast.irradiance.pipeline import (
    ContractViolationError,
    PipelineOrderError,
    RejectReason,
    SplitRole,
    TimeShift,
    apply_time_shift,
    derive_dni,
    fuse_sensors,
    interpolate_1s,
    label_series,
    median_consistency_filter,
    zenith_filter,
)
from sky_nowcast.irradiance.series import (
    TIMESTAMP_COLUMN,
    IrradianceSample,
    IrradianceSeries,
    read_series,
    series_to_csv_frame,
)
from sky_nowcast.solar.geometry import SolarPosition, solar_position_frame


def _series(site, stamps, ghi, **columns):
    index = pd.DatetimeIndex(pd.to_datetime(stamps, utc=True, format="ISO8601"), name=TIMESTAMP_COLUMN).as_unit("ns")
    frame = pd.DataFrame({"ghi": ghi, "dhi": np.zeros(len(ghi)), "dni": np.zeros(len(ghi)), **columns}, index=index)
    return IrradianceSeries(site=site, frame=frame, native_interval=60.0)


def test_median_filter_accepts_consistent_instant():
    verdict = median_consistency_filter([100.0], [800.0], [509.0], SolarPosition(60.0, 180.0))
    assert verdict.accepted
    assert verdict.ghi == 509.0
    assert verdict.ghi_calculated == pytest.approx(500.0)


def test_median_filter_rejects_inconsistent_instant():
    verdict = median_consistency_filter([100.0], [800.0], [520.0], SolarPosition(60.0, 180.0))
    assert not verdict.accepted
    assert verdict.reason is RejectReason.INCONSISTENT


def test_median_filter_ignores_single_outlier():
    verdict = median_consistency_filter(
        [100.0, 101.0, 99.0, 100.0, 400.0],
        [800.0, 801.0, 799.0, 800.0, 1100.0],
        [505.0, 504.0, 506.0, 805.0, 505.0],
        SolarPosition(60.0, 180.0),
    )
    assert verdict.accepted
    assert verdict.ghi == 505.0


def test_median_filter_reports_missing_component():
    verdict = median_consistency_filter([], [800.0], [509.0], SolarPosition(60.0, 180.0))
    assert not verdict.accepted
    assert verdict.reason is RejectReason.MISSING_DHI


@pytest.mark.parametrize(
    "dhi_set, dni_set, ghi_set",
    [
        ([100.0, 101.0, 99.0, 100.0, 400.0], [800.0, 801.0, 799.0, 800.0, 1100.0], [505.0, 504.0, 506.0, 805.0, 505.0]),
        ([100.0, 130.0, 99.0, 90.0], [800.0, 700.0, 760.0, 810.0], [520.0, 480.0, 530.0, 470.0]),
        ([100.0, 100.0, 100.0], [800.0, 800.0, 900.0], [540.0, 400.0, 520.0]),
    ],
)
def test_median_filter_ignores_sensor_order(dhi_set, dni_set, ghi_set):
    pos = SolarPosition(60.0, 180.0)
    expected = median_consistency_filter(dhi_set, dni_set, ghi_set, pos)
    rng = np.random.default_rng(3)
    for _ in range(10):
        shuffled = [list(rng.permutation(values)) for values in (dhi_set, dni_set, ghi_set)]
        verdict = median_consistency_filter(*shuffled, pos)
        assert verdict.accepted == expected.accepted
        assert verdict.reason == expected.reason
        assert verdict.ghi == expected.ghi


def test_interpolate_bridges_short_gaps(paris):
    series = _series(paris, ["2019-06-21T12:00:00", "2019-06-21T12:01:00"], [100.0, 160.0])
    out = interpolate_1s(series)
    assert len(out) == 61
    assert out.native_interval == 1.0
    assert out.frame["ghi"].iloc[30] == pytest.approx(130.0)
    assert out.frame["interpolated"].sum() == 59
    assert not out.frame["interpolated"].iloc[0]
    assert out.stages[-1] == "interpolate_1s"


def test_interpolate_leaves_long_gaps_empty(paris):
    series = _series(
        paris,
        ["2019-06-21T12:00:00", "2019-06-21T12:01:00", "2019-06-21T12:05:00", "2019-06-21T12:06:00"],
        [100.0, 100.0, 200.0, 200.0],
    )
    out = interpolate_1s(series, max_gap=60.0)
    assert len(out) == 122
    stamps = out.index
    assert not ((stamps > pd.Timestamp("2019-06-21T12:01:00Z")) & (stamps < pd.Timestamp("2019-06-21T12:05:00Z"))).any()
    assert out.gap_seconds == {"2019-06-21": 240.0}


def test_interpolate_keeps_off_grid_knots(paris):
    series = _series(paris, ["2019-06-21T12:00:00.500", "2019-06-21T12:00:03.500"], [10.0, 40.0])
    out = interpolate_1s(series)
    assert len(out) == 5
    assert out.frame["ghi"].tolist() == pytest.approx([10.0, 15.0, 25.0, 35.0, 40.0])


def test_interpolate_skips_rejected_rows(paris):
    series = _series(
        paris,
        ["2019-06-21T12:00:00", "2019-06-21T12:00:30", "2019-06-21T12:01:00"],
        [100.0, 999.0, 160.0],
        rejected_reason=["", "inconsistent", ""],
    )
    out = interpolate_1s(series)
    assert out.frame["ghi"].iloc[30] == pytest.approx(130.0)


def test_interpolated_clear_flag_needs_both_neighbours(paris):
    series = _series(
        paris,
        ["2019-06-21T12:00:00", "2019-06-21T12:01:00", "2019-06-21T12:02:00"],
        [100.0, 100.0, 100.0],
        clear=[True, True, False],
    )
    out = interpolate_1s(series).frame["clear"]
    assert out.iloc[:61].all()
    assert not out.iloc[61:120].any()


def test_interpolate_twice_changes_nothing(paris):
    series = _series(
        paris,
        [
            "2019-06-21T12:00:00.500",
            "2019-06-21T12:00:20",
            "2019-06-21T12:01:00",
            "2019-06-21T12:05:00",
            "2019-06-21T12:05:30.250",
        ],
        [100.0, 140.0, 160.0, 300.0, 250.0],
        clear=[True, True, False, True, True],
    )
    once = interpolate_1s(series, max_gap=60.0)
    twice = interpolate_1s(once, max_gap=60.0)
    pd.testing.assert_frame_equal(twice.frame, once.frame)
    assert twice.gap_seconds == once.gap_seconds == {"2019-06-21": 240.0}


def test_zenith_filter_keeps_low_sun_only(paris):
    stamps = pd.date_range("2019-06-21T00:00:00", periods=48, freq="30min")
    series = _series(paris, stamps, np.ones(48))
    out = zenith_filter(series, max_zenith=80.0)
    zenith = solar_position_frame(paris, out.index)["zenith"]
    assert (zenith <= 80.0).all()
    assert 0 < len(out) < 48


def test_time_shift_moves_training_labels(paris):
    series = _series(paris, ["2019-06-21T12:00:00"], [100.0])
    shifted = apply_time_shift(series, TimeShift(-30.0), SplitRole.TRAIN)
    assert shifted.index[0] == pd.Timestamp("2019-06-21T11:59:30Z")
    assert shifted.stages[-1] == "time_shift"


def test_time_shift_never_touches_test_labels(paris):
    series = _series(paris, ["2019-06-21T12:00:00"], [100.0])
    assert apply_time_shift(series, TimeShift(), SplitRole.TEST) is series
    with pytest.raises(ContractViolationError):
        apply_time_shift(series, TimeShift(10.0), SplitRole.TEST)


def test_time_shift_must_precede_zenith_filter(paris):
    series = _series(paris, ["2019-06-21T12:00:00"], [100.0])
    filtered = zenith_filter(series)
    with pytest.raises(PipelineOrderError):
        apply_time_shift(filtered, TimeShift(10.0), SplitRole.TRAIN)


def test_time_shift_range():
    TimeShift(300.0)
    with pytest.raises(ConfigError):
        TimeShift(301.0)
    with pytest.raises(ConfigError):
        TimeShift(float("nan"))


def test_label_series_runs_stages_in_order(paris):
    stamps = pd.date_range("2019-06-21T11:00:00", periods=10, freq="60s")
    series = _series(paris, stamps, np.linspace(500.0, 600.0, 10))
    out = label_series(series, SplitRole.TRAIN, TimeShift(-20.0))
    assert out.stages == ("time_shift", "interpolate_1s", "zenith_filter")
    assert out.index[0] == pd.Timestamp("2019-06-21T10:59:40Z")


def test_fuse_sensors_takes_medians_and_flags_rejects(paris):
    noon = "2019-06-21T11:50:00Z"
    later = "2019-06-21T11:51:00Z"
    zenith = float(solar_position_frame(paris, [pd.Timestamp(noon)])["zenith"].iloc[0])
    cos_z = np.cos(np.radians(zenith))
    ghi = 800.0 * cos_z + 100.0
    raw = pd.DataFrame(
        {
            TIMESTAMP_COLUMN: pd.to_datetime([noon] * 3 + [later] * 3, utc=True),
            "ghi": [ghi, ghi + 1.0, ghi + 300.0, 10.0, 11.0, 12.0],
            "dhi": [100.0, 100.0, 100.0, 100.0, 100.0, 100.0],
            "dni": [800.0, 800.0, 800.0, 800.0, 800.0, 800.0],
            "sensor_id": ["a", "b", "c", "a", "b", "c"],
        }
    )
    fused = fuse_sensors(raw, paris)
    assert len(fused) == 2
    assert fused.frame["ghi"].iloc[0] == pytest.approx(ghi + 1.0)
    assert fused.frame["rejected_reason"].tolist() == ["", "inconsistent"]
    assert fused.stages == ("median_fused",)
    labels = interpolate_1s(fused)
    assert len(labels) == 1


def test_derive_dni(paris):
    noon = pd.Timestamp("2019-06-21T11:50:00Z")
    zenith = float(solar_position_frame(paris, [noon])["zenith"].iloc[0])
    series = _series(paris, ["2019-06-21T11:50:00", "2019-06-21T23:00:00"], [500.0, 0.0])
    frame = series.frame.copy()
    frame["dhi"] = [100.0, 0.0]
    out = derive_dni(series.with_frame(frame))
    assert out.frame["dni"].iloc[0] == pytest.approx(400.0 / np.cos(np.radians(zenith)))
    assert np.isnan(out.frame["dni"].iloc[1])


def test_series_validation(paris):
    index = pd.DatetimeIndex(["2019-06-21T12:01:00", "2019-06-21T12:00:00"], tz="UTC")
    frame = pd.DataFrame({"ghi": [1.0, 2.0], "dhi": [0.0, 0.0], "dni": [0.0, 0.0]}, index=index)
    with pytest.raises(DataError):
        IrradianceSeries(site=paris, frame=frame, native_interval=60.0)
    with pytest.raises(DataError):
        IrradianceSeries(site=paris, frame=frame.sort_index().drop(columns="dni"), native_interval=60.0)
    with pytest.raises(DataError):
        IrradianceSample(timestamp=pd.Timestamp("2019-06-21T12:00:00Z"), ghi=-1.0)


def test_series_csv_round_trip(paris, tmp_path):
    series = _series(paris, ["2019-06-21T12:00:00", "2019-06-21T12:01:00"], [100.0, 200.0], clear=[True, False])
    path = tmp_path / "irradiance.csv"
    series_to_csv_frame(series).to_csv(path, index=False)
    loaded = read_series(path, paris)
    assert loaded.frame["ghi"].tolist() == [100.0, 200.0]
    assert loaded.frame["clear"].tolist() == [True, False]
    assert loaded.native_interval == 60.0
