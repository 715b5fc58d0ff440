import numpy as np
import pytest

from wacm.errors import FormatError, ValidationError
from wacm.imaging import (
    LUMA,
    LUMA_CORRECTED,
    MEAN,
    GrayOp,
    clamp,
    gray_op_by_name,
    load_raster,
    save_raster,
    to_gray,
)


def test_mean_of_constant_pixel():
    img = np.empty((3, 2, 2))
    img[0], img[1], img[2] = 0.3, 0.6, 0.9
    assert to_gray(img, MEAN) == pytest.approx(0.6)


def test_luma_weights_sum():
    # the literal coefficients do not sum to 1
    img = np.ones((3, 2, 2))
    assert to_gray(img, LUMA) == pytest.approx(0.993)
    assert to_gray(img, LUMA_CORRECTED) == pytest.approx(1.0)


@pytest.mark.parametrize("c", [0.0, 0.25, 1.0])
def test_mean_of_equal_channels(c):
    img = np.full((3, 4, 4), c)
    assert to_gray(img, MEAN) == pytest.approx(c)


def test_to_gray_rejects_single_channel():
    with pytest.raises(ValidationError):
        to_gray(np.zeros((1, 4, 4)), MEAN)


def test_to_gray_linearity():
    rng = np.random.default_rng(0)
    a = rng.random((3, 6, 6))
    b = rng.random((3, 6, 6))
    lhs = to_gray(0.3 * a + 1.7 * b, LUMA)
    rhs = 0.3 * to_gray(a, LUMA) + 1.7 * to_gray(b, LUMA)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_gray_op_weights_positive():
    with pytest.raises(ValidationError):
        GrayOp("bad", (0.5, -0.1, 0.6))


def test_gray_op_by_name():
    assert gray_op_by_name("mean") is MEAN
    with pytest.raises(ValidationError):
        gray_op_by_name("lab")


def test_clamp_examples():
    assert clamp(np.array([[[-0.2]]])) == pytest.approx(0.0)
    assert clamp(np.array([[[0.5]]])) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        clamp(np.zeros((1, 2, 2)), 1.0, 0.0)


def test_clamp_idempotent():
    rng = np.random.default_rng(1)
    x = rng.normal(0, 2, size=(3, 8, 8))
    once = clamp(x)
    assert np.array_equal(clamp(once), once)


def test_raster_byte_mapping(tmp_path):
    img = np.array([[[1.0, 128 / 255], [0.0, 1.7]]])
    path = tmp_path / "t.pgm"
    save_raster(img, path)
    back = load_raster(path)
    assert back[0, 0, 0] == pytest.approx(1.0)
    assert back[0, 0, 1] == pytest.approx(128 / 255)
    assert back[0, 1, 0] == pytest.approx(0.0)
    assert back[0, 1, 1] == pytest.approx(1.0)  # clamped at save


def test_raster_round_trip_on_grid(tmp_path):
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, size=(3, 6, 7)).astype(np.float64) / 255.0
    path = tmp_path / "t.ppm"
    save_raster(img, path)
    assert np.array_equal(load_raster(path), img)


def test_png_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(3, 5, 4)).astype(np.float64) / 255.0
    path = tmp_path / "t.png"
    save_raster(img, path)
    assert np.array_equal(load_raster(path), img)


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.ppm"
    path.write_bytes(b"P3\n2 2\n255\n")
    with pytest.raises(FormatError):
        load_raster(path)


def test_load_rejects_bad_maxval(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
    with pytest.raises(FormatError):
        load_raster(path)


def test_load_rejects_truncated_payload(tmp_path):
    path = tmp_path / "trunc.ppm"
    path.write_bytes(b"P6\n2 2\n255\n" + bytes(5))
    with pytest.raises(FormatError):
        load_raster(path)
