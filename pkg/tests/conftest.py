import numpy as np
import pandas as pd
import pytest

from sky_nowcast.alignment import AlignedPair
from sky_nowcast.config import load_config
from sky_nowcast.irradiance.series import TIMESTAMP_COLUMN, IrradianceSeries
from sky_nowcast.solar.clearsky import ClearSkyContext, ClearSkyModel, SkyCondition, predict_clear_sky_array
from sky_nowcast.solar.geometry import Site, SolarPosition, solar_position_frame


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch):
    monkeypatch.delenv("SKY_NOWCAST_CONFIG", raising=False)
    monkeypatch.delenv("SKY_NOWCAST_JOBS", raising=False)
    monkeypatch.delenv("LOG_LEVEL", raising=False)


@pytest.fixture
def paris():
    return Site(name="synthetic", latitude=48.713, longitude=2.208, altitude=156.0, utc_offset=3600)


@pytest.fixture
def pipeline_config():
    return load_config()


@pytest.fixture
def synthetic_site(pipeline_config):
    return pipeline_config.site_config("synthetic")


@pytest.fixture
def clear_day():
    """Clear-sky GHI on a 60 s grid over one UTC day, as (series, zenith)."""

    def _build(site, day="2019-06-21", model=None):
        model = model or ClearSkyModel()
        index = pd.date_range(day, periods=1440, freq="60s", tz="UTC", name=TIMESTAMP_COLUMN).as_unit("ns")
        zenith = solar_position_frame(site, index)["zenith"].to_numpy()
        i_clr, _ = predict_clear_sky_array(model, zenith, site)
        frame = pd.DataFrame({"ghi": i_clr, "dhi": 0.3 * i_clr, "dni": np.zeros(len(index))}, index=index)
        return IrradianceSeries(site=site, frame=frame, native_interval=60.0), zenith

    return _build


@pytest.fixture
def make_pair():
    def _make(
        ref="synthetic/20190101_120000.png",
        instant="2019-01-01T12:00:00Z",
        ghi=300.0,
        i_clr=400.0,
        i_extr=500.0,
        sky=SkyCondition.CLEAR,
        zenith=60.0,
        azimuth=180.0,
    ):
        return AlignedPair(
            image_ref=ref,
            label_ghi=ghi,
            ctx=ClearSkyContext(i_clr=i_clr, i_extr=i_extr),
            sky_flag=sky,
            instant=pd.Timestamp(instant),
            position=SolarPosition(zenith=zenith, azimuth=azimuth),
        )

    return _make
