import math

import pandas as pd
import pytest

from sky_nowcast.errors import ConfigError
from sky_nowcast.solar.geometry import (
    EphemerisRangeError,
    Site,
    SolarConstant,
    SolarPosition,
    extraterrestrial_ghi,
    extraterrestrial_ghi_array,
    solar_position,
    solar_position_frame,
)


def test_folsom_summer_solstice_minimum_zenith():
    folsom = Site(name="folsom", latitude=38.642, longitude=-121.148, altitude=50.0, utc_offset=-28800)
    # local standard day, minute resolution
    times = pd.date_range("2016-06-21 08:00", periods=1440, freq="60s", tz="UTC")
    zenith = solar_position_frame(folsom, times)["zenith"]
    assert zenith.min() == pytest.approx(15.2, abs=0.1)


def test_solar_position_matches_frame():
    site = Site(name="sirta", latitude=48.713, longitude=2.208, altitude=156.0)
    instant = pd.Timestamp("2019-03-20T12:00:00Z")
    single = solar_position(site, instant)
    frame = solar_position_frame(site, [instant])
    assert single.zenith == pytest.approx(float(frame["zenith"].iloc[0]))
    assert 0.0 <= single.azimuth < 360.0
    assert 130.0 < single.azimuth < 230.0


def test_naive_instants_are_read_as_utc():
    site = Site(name="sirta", latitude=48.713, longitude=2.208)
    naive = solar_position(site, "2019-03-20 12:00:00")
    aware = solar_position(site, pd.Timestamp("2019-03-20T13:00:00+01:00"))
    assert naive.zenith == pytest.approx(aware.zenith)


def test_ephemeris_range_is_enforced():
    site = Site(name="sirta", latitude=48.713, longitude=2.208)
    with pytest.raises(EphemerisRangeError):
        solar_position(site, "1949-12-31T12:00:00Z")
    with pytest.raises(EphemerisRangeError):
        solar_position_frame(site, pd.DatetimeIndex(["2101-01-01T00:00:00"], tz="UTC"))


def test_empty_frame_has_columns():
    site = Site(name="sirta", latitude=48.713, longitude=2.208)
    frame = solar_position_frame(site, pd.DatetimeIndex([], tz="UTC"))
    assert list(frame.columns) == ["zenith", "azimuth"]
    assert frame.empty


def test_extraterrestrial_ghi():
    assert extraterrestrial_ghi(SolarPosition(0.0, 0.0)) == pytest.approx(1366.0)
    assert extraterrestrial_ghi(SolarPosition(60.0, 0.0)) == pytest.approx(683.0)
    assert extraterrestrial_ghi(SolarPosition(90.0, 0.0)) == 0.0
    assert extraterrestrial_ghi(SolarPosition(120.0, 0.0)) == 0.0
    assert extraterrestrial_ghi(SolarPosition(0.0, 0.0), SolarConstant(1361.0)) == pytest.approx(1361.0)
    values = extraterrestrial_ghi_array([0.0, 60.0, 95.0])
    assert values.tolist() == pytest.approx([1366.0, 683.0, 0.0])


def test_solar_position_validation():
    assert SolarPosition(45.0, 370.0).azimuth == pytest.approx(10.0)
    assert SolarPosition(45.0, -90.0).azimuth == pytest.approx(270.0)
    with pytest.raises(ValueError):
        SolarPosition(-1.0, 0.0)
    with pytest.raises(ValueError):
        SolarPosition(181.0, 0.0)
    with pytest.raises(ConfigError):
        SolarConstant(0.0)


def test_site_from_mapping():
    site = Site.from_mapping(
        {"name": "nrel", "latitude": 39.742, "longitude": -105.18, "altitude_m": 1829, "utc_offset_s": -25200}
    )
    assert site.altitude == 1829.0
    assert site.local_timezone.utcoffset(None).total_seconds() == -25200
    assert Site.from_mapping(site.to_dict()) == site


@pytest.mark.parametrize(
    "payload",
    [
        {"latitude": 1.0, "longitude": 1.0},
        {"name": "x", "latitude": 91.0, "longitude": 0.0},
        {"name": "x", "latitude": 0.0, "longitude": 181.0},
        {"name": "x", "latitude": 0.0},
        {"name": "x", "latitude": "north", "longitude": 0.0},
        {"name": "x", "latitude": 0.0, "longitude": 0.0, "elevation": 3},
        {"name": "x", "latitude": 0.0, "longitude": 0.0, "utc_offset_s": 60_000},
    ],
)
def test_site_from_mapping_rejects_bad_payloads(payload):
    with pytest.raises(ConfigError):
        Site.from_mapping(payload)


def test_zenith_is_monotone_towards_noon():
    site = Site(name="sirta", latitude=48.713, longitude=2.208)
    times = pd.date_range("2019-06-21T06:00:00Z", "2019-06-21T11:00:00Z", freq="1h")
    zenith = solar_position_frame(site, times)["zenith"].to_numpy()
    assert all(a > b for a, b in zip(zenith, zenith[1:]))
    assert math.isclose(solar_position(site, times[0]).zenith, zenith[0], rel_tol=1e-9)
