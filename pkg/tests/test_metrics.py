import numpy as np
import pytest

from wacm.errors import ValidationError
from wacm.metrics import psnr, ssim


def test_psnr_identity_is_infinite():
    a = np.random.default_rng(0).random((3, 16, 16))
    assert psnr(a, a) == np.inf


def test_psnr_unit_error():
    a = np.zeros((1, 8, 8))
    b = np.ones((1, 8, 8))
    assert psnr(a, b) == pytest.approx(0.0)


def test_psnr_uniform_small_error():
    a = np.full((3, 8, 8), 0.5)
    assert psnr(a, a + 0.1) == pytest.approx(20.0)


def test_psnr_shape_mismatch():
    with pytest.raises(ValidationError):
        psnr(np.zeros((1, 8, 8)), np.zeros((1, 8, 9)))


def test_psnr_monotone_in_noise():
    rng = np.random.default_rng(1)
    a = rng.random((3, 16, 16))
    values = []
    for amp in (0.01, 0.05, 0.1):
        noise = amp * np.sign(rng.standard_normal(a.shape))
        values.append(psnr(a, a + noise))
    assert values[0] > values[1] > values[2]


def test_ssim_identity():
    a = np.random.default_rng(2).random((3, 16, 16))
    assert ssim(a, a) == pytest.approx(1.0)


def test_ssim_symmetry():
    rng = np.random.default_rng(3)
    a, b = rng.random((1, 16, 16)), rng.random((1, 16, 16))
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_ssim_inverted_binary_is_negative():
    rng = np.random.default_rng(4)
    a = (rng.random((1, 32, 32)) > 0.5).astype(np.float64)
    assert ssim(a, 1.0 - a) < 0


def test_ssim_range():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a, b = rng.random((1, 16, 16)), rng.random((1, 16, 16))
        assert -1.0 <= ssim(a, b) <= 1.0


def test_ssim_too_small_image():
    with pytest.raises(ValidationError):
        ssim(np.zeros((1, 8, 8)), np.zeros((1, 8, 8)))


def test_ssim_matches_reference_implementation():
    skimage_metrics = pytest.importorskip("skimage.metrics")
    rng = np.random.default_rng(6)
    a = rng.random((24, 24))
    b = np.clip(a + 0.1 * rng.standard_normal(a.shape), 0, 1)
    ours = ssim(a, b)
    ref = skimage_metrics.structural_similarity(
        a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
        use_sample_covariance=False,
    )
    assert ours == pytest.approx(ref, abs=1e-4)
