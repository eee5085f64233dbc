import math

import numpy as np
import pandas as pd
import pytest

from sky_nowcast.errors import ConfigError, ShapeError
from sky_nowcast.imaging.image import SkyImage
from sky_nowcast.imaging.sunmask import (
    BelowHorizonError,
    CameraModel,
    Projection,
    append_mask_channel,
    radial_distance,
    render_sun_mask,
    sun_center,
    sun_centers,
)
from sky_nowcast.solar.geometry import SolarPosition

CAMERAS = (
    CameraModel(Projection.STEREOGRAPHIC, focal=0.48, theta_c=165.0),
    CameraModel(Projection.EQUIDISTANT, focal=0.63, theta_c=182.0),
    CameraModel(Projection.EQUIDISTANT, focal=0.67, theta_c=180.0),
)


@pytest.mark.parametrize("camera", CAMERAS)
def test_zenith_sun_maps_to_the_exact_centre(camera):
    for azimuth in (0.0, 90.0, 213.0):
        assert sun_center(camera, SolarPosition(0.0, azimuth)) == (32.0, 32.0)


@pytest.mark.parametrize("camera", CAMERAS)
def test_sun_stays_inside_the_roi_up_to_80_degrees(camera):
    zenith, azimuth = np.meshgrid(np.arange(0.0, 80.5, 0.5), np.arange(0.0, 360.0, 5.0))
    centres = sun_centers(camera, zenith.ravel(), azimuth.ravel())
    distance = np.hypot(centres[:, 0] - 32.0, centres[:, 1] - 32.0)
    assert (distance < 32.0).all()


def test_array_and_scalar_centres_agree():
    camera = CAMERAS[0]
    expected = sun_center(camera, SolarPosition(47.0, 123.0))
    assert sun_centers(camera, [47.0], [123.0])[0].tolist() == pytest.approx(list(expected))


def test_projection_formulas():
    stereo = CameraModel(Projection.STEREOGRAPHIC, focal=0.5)
    equi = CameraModel(Projection.EQUIDISTANT, focal=0.5)
    assert radial_distance(stereo, 90.0) == pytest.approx(1.0)
    assert radial_distance(equi, 90.0) == pytest.approx(math.pi / 4)
    # azimuth 90° with theta_c 0 moves the sun along +x only
    x, y = sun_center(equi, SolarPosition(60.0, 90.0))
    assert x == pytest.approx(32.0 * (1.0 + 0.5 * math.radians(60.0)))
    assert y == pytest.approx(32.0)


def test_disc_area_matches_brute_force():
    camera = CameraModel(Projection.EQUIDISTANT, focal=0.5)
    mask = render_sun_mask(camera, SolarPosition(0.0, 0.0))
    assert mask.center == (32.0, 32.0)
    radius = camera.mask_radius
    count = 0
    for row in range(64):
        for col in range(64):
            if (col + 0.5 - 32.0) ** 2 + (row + 0.5 - 32.0) ** 2 <= radius**2:
                count += 1
    assert mask.area == count
    assert mask.mask.shape == (64, 64)


def test_mask_radius_scales_with_width():
    assert CameraModel(Projection.EQUIDISTANT, focal=0.5, width=128).mask_radius == 10.0


def test_sun_below_horizon_is_rejected():
    with pytest.raises(BelowHorizonError):
        sun_center(CAMERAS[1], SolarPosition(95.0, 0.0))
    with pytest.raises(BelowHorizonError):
        sun_centers(CAMERAS[1], [10.0, 90.0], [0.0, 0.0])


def test_clipped_mask_logs_warning(caplog):
    camera = CameraModel(Projection.STEREOGRAPHIC, focal=2.0)
    mask = render_sun_mask(camera, SolarPosition(85.0, 90.0))
    assert mask.area == 0
    assert "fully clipped" in caplog.text


def test_append_mask_channel():
    image = SkyImage(
        pixels=np.zeros((64, 64, 3), np.uint8),
        ts_file_name=pd.Timestamp("2019-01-01T12:00:00Z"),
        ts_date_modified=None,
    )
    mask = render_sun_mask(CAMERAS[1], SolarPosition(30.0, 200.0))
    out = append_mask_channel(image, mask)
    assert out.channels == 4
    assert set(np.unique(out.pixels[..., 3])) <= {0, 255}
    assert int((out.pixels[..., 3] == 255).sum()) == mask.area
    with pytest.raises(ShapeError):
        append_mask_channel(out, mask)


def test_camera_from_mapping():
    camera = CameraModel.from_mapping({"projection": "Stereographic", "focal": 0.48, "theta_c": 165}, width=32)
    assert camera.projection is Projection.STEREOGRAPHIC
    assert camera.width == 32
    with pytest.raises(ConfigError):
        CameraModel.from_mapping({"projection": "fisheye", "focal": 0.5})
    with pytest.raises(ConfigError):
        CameraModel.from_mapping({"projection": "equidistant"})
    with pytest.raises(ConfigError):
        CameraModel(Projection.EQUIDISTANT, focal=0.5, theta_c=360.0)
