"""PSNR and SSIM over [0, 1] images.

PSNR uses the mean squared error over all channels and pixels; a zero MSE
is reported as +inf.  SSIM follows the standard single-scale formulation:
an 11x11 Gaussian window with sigma 1.5, K1=0.01, K2=0.03 and dynamic
range 1.0, averaged over channels for color images.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import correlate

from .errors import ValidationError

__all__ = ["psnr", "ssim"]

_WINDOW_SIZE = 11
_WINDOW_SIGMA = 1.5
_K1 = 0.01
_K2 = 0.03


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[np.newaxis], b[np.newaxis]
    if a.ndim != 3:
        raise ValidationError(f"expected (C, H, W) images, got shape {a.shape}")
    return a, b


def psnr(a, b, peak: float = 1.0) -> float:
    """10 * log10(peak^2 / MSE) in decibels; +inf for identical inputs."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax * ax) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def _ssim_plane(x: np.ndarray, y: np.ndarray, peak: float) -> float:
    win = _gaussian_window(_WINDOW_SIZE, _WINDOW_SIGMA)
    c1 = (_K1 * peak) ** 2
    c2 = (_K2 * peak) ** 2

    def filt(img):
        # valid region only: crop after filtering with reflect padding
        full = correlate(img, win, mode="reflect")
        pad = _WINDOW_SIZE // 2
        return full[pad:-pad, pad:-pad]

    mu_x = filt(x)
    mu_y = filt(y)
    mu_xx = mu_x * mu_x
    mu_yy = mu_y * mu_y
    mu_xy = mu_x * mu_y
    var_x = filt(x * x) - mu_xx
    var_y = filt(y * y) - mu_yy
    cov = filt(x * y) - mu_xy
    num = (2.0 * mu_xy + c1) * (2.0 * cov + c2)
    den = (mu_xx + mu_yy + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def ssim(a, b, peak: float = 1.0) -> float:
    """Mean structural similarity; channels of color images are averaged."""
    a, b = _check_pair(a, b)
    if min(a.shape[1], a.shape[2]) < _WINDOW_SIZE:
        raise ValidationError(
            f"image {a.shape[1]}x{a.shape[2]} smaller than the {_WINDOW_SIZE}-pixel window"
        )
    return float(np.mean([_ssim_plane(a[c], b[c], peak) for c in range(a.shape[0])]))
