import numpy as np
import pandas as pd
import pytest

from sky_nowcast.errors import ConfigError, DataError, ShapeError
from sky_nowcast.imaging.image import (
    RoiSpec,
    SkyImage,
    apply_roi,
    crop_and_resize,
    decode_image,
    disc_mask,
    encode_png,
    mean_image,
    process_image,
    resize_box,
)


def _image(height=128, width=128, value=200):
    return SkyImage(
        pixels=np.full((height, width, 3), value, dtype=np.uint8),
        ts_file_name=pd.Timestamp("2019-01-01T12:00:00Z"),
        ts_date_modified=pd.Timestamp("2019-01-01T12:00:00Z"),
    )


def test_sky_image_validation():
    with pytest.raises(ShapeError):
        SkyImage(pixels=np.zeros((4, 4), np.uint8), ts_file_name=None, ts_date_modified=None)
    with pytest.raises(ShapeError):
        SkyImage(pixels=np.zeros((4, 4, 2), np.uint8), ts_file_name=None, ts_date_modified=None)
    with pytest.raises(ShapeError):
        SkyImage(pixels=np.zeros((4, 4, 3), np.float32), ts_file_name=None, ts_date_modified=None)
    image = _image(10, 20)
    assert (image.height, image.width, image.channels) == (10, 20, 3)


def test_apply_roi_zeroes_outside_the_disc():
    roi = RoiSpec(radius_px=40.0, center_px=(64.0, 64.0))
    out = apply_roi(_image(), roi)
    assert out.pixels[64, 64].tolist() == [200, 200, 200]
    assert out.pixels[0, 0].tolist() == [0, 0, 0]
    inside = disc_mask(128, 128, (64.0, 64.0), 40.0)
    assert (out.pixels[inside] == 200).all()
    assert (out.pixels[~inside] == 0).all()


def test_apply_roi_rejects_oversized_roi():
    with pytest.raises(ConfigError):
        apply_roi(_image(), RoiSpec(radius_px=70.0, center_px=(64.0, 64.0)))


def test_crop_and_resize_returns_square_output():
    roi = RoiSpec(radius_px=32.0, center_px=(50.0, 70.0))
    out = crop_and_resize(_image(), roi, out_w=16)
    assert out.pixels.shape == (16, 16, 3)
    assert (out.pixels == 200).all()


def test_crop_pads_outside_the_frame():
    roi = RoiSpec(radius_px=32.0, center_px=(16.0, 64.0))
    out = crop_and_resize(_image(), roi, out_w=64)
    # left half of the crop window lies outside the frame
    assert (out.pixels[:, :16] == 0).all()
    assert (out.pixels[:, 16:] == 200).all()


def test_process_image_keeps_timestamps():
    roi = RoiSpec(radius_px=64.0, center_px=(64.0, 64.0))
    image = _image()
    out = process_image(image, roi, 64)
    assert out.pixels.shape == (64, 64, 3)
    assert out.ts_file_name == image.ts_file_name
    assert out.pixels[32, 32].tolist() == [200, 200, 200]
    assert out.pixels[0, 0].tolist() == [0, 0, 0]


def test_resize_box_averages_blocks():
    pixels = np.zeros((4, 4, 3), dtype=np.uint8)
    pixels[:2, :2] = 100
    out = resize_box(pixels, 2)
    assert out[0, 0].tolist() == [100, 100, 100]
    assert out[1, 1].tolist() == [0, 0, 0]


def test_roi_from_mapping():
    roi = RoiSpec.from_mapping({"radius_px": 340, "center_px": [502, 394]})
    assert roi.center_px == (502.0, 394.0)
    assert roi.crop_window() == (162, 54, 842, 734)
    assert roi.to_dict() == {"radius_px": 340.0, "center_px": [502.0, 394.0]}
    with pytest.raises(ConfigError):
        RoiSpec.from_mapping({"radius_px": 10})
    with pytest.raises(ConfigError):
        RoiSpec.from_mapping({"radius_px": 10, "center_px": [1, 1], "shape": "disc"})
    with pytest.raises(ConfigError):
        RoiSpec(radius_px=0.0, center_px=(0.0, 0.0))


def test_mean_image():
    frames = [np.full((2, 2, 3), 10, np.uint8), np.full((2, 2, 3), 20, np.uint8)]
    assert (mean_image(frames) == 15.0).all()
    with pytest.raises(DataError):
        mean_image([])
    with pytest.raises(ShapeError):
        mean_image([np.zeros((2, 2, 3)), np.zeros((3, 3, 3))])


def test_png_round_trip(tmp_path):
    pixels = np.random.default_rng(0).integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
    path = tmp_path / "frame.png"
    encode_png(pixels, path)
    assert np.array_equal(decode_image(path), pixels)


def test_decode_rejects_corrupt_files(tmp_path):
    path = tmp_path / "broken.jpg"
    path.write_bytes(b"not an image")
    with pytest.raises(DataError):
        decode_image(path)
    with pytest.raises(DataError):
        decode_image(tmp_path / "missing.png")
