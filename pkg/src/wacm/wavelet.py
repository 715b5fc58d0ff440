"""Single-level 2D Haar transform and the 12-channel wavelet stack.

The forward transform maps each non-overlapping 2x2 block [[a,b],[c,d]] to

    cA = ((a+b)+(c+d))/2    cH = ((a+b)-(c+d))/2
    cV = ((a-b)+(c-d))/2    cD = ((a-b)-(c-d))/2

and the inverse undoes it exactly (the pair is self-inverse: each is half a
4x4 Hadamard matrix).  An RGB image becomes a 12-channel stack ordered
color-major: [cA_R, cH_R, cV_R, cD_R, cA_G, ..., cD_B].
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .imaging import GrayOp, _as_image

__all__ = [
    "WaveletBands",
    "dwt2_haar",
    "idwt2_haar",
    "stack",
    "unstack",
    "gray_wavelet",
    "gray_project",
]

BAND_NAMES = ("cA", "cH", "cV", "cD")


class WaveletBands(NamedTuple):
    cA: np.ndarray
    cH: np.ndarray
    cV: np.ndarray
    cD: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack(self)


def _check_even_plane(plane) -> np.ndarray:
    arr = np.asarray(plane, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"expected a 2-D plane, got shape {arr.shape}")
    h, w = arr.shape
    if h < 2 or w < 2 or h % 2 or w % 2:
        raise ValidationError(f"plane dimensions must be even and >= 2, got {h}x{w}")
    return arr


def dwt2_haar(plane) -> WaveletBands:
    """Forward Haar transform of one plane; no padding, dims must be even."""
    p = _check_even_plane(plane)
    a = p[0::2, 0::2]
    b = p[0::2, 1::2]
    c = p[1::2, 0::2]
    d = p[1::2, 1::2]
    ab, cd = a + b, c + d
    amb, cmd = a - b, c - d
    return WaveletBands(
        cA=(ab + cd) / 2.0,
        cH=(ab - cd) / 2.0,
        cV=(amb + cmd) / 2.0,
        cD=(amb - cmd) / 2.0,
    )


def idwt2_haar(bands: WaveletBands) -> np.ndarray:
    """Inverse Haar transform; reconstructs the plane exactly."""
    cA, cH, cV, cD = (np.asarray(x, dtype=np.float64) for x in bands)
    if not (cA.shape == cH.shape == cV.shape == cD.shape) or cA.ndim != 2:
        raise ValidationError("bands must be four equal-shaped 2-D grids")
    h2, w2 = cA.shape
    out = np.empty((2 * h2, 2 * w2), dtype=np.float64)
    out[0::2, 0::2] = (cA + cH + cV + cD) / 2.0
    out[0::2, 1::2] = (cA + cH - cV - cD) / 2.0
    out[1::2, 0::2] = (cA - cH + cV - cD) / 2.0
    out[1::2, 1::2] = (cA - cH - cV + cD) / 2.0
    return out


def stack(img) -> np.ndarray:
    """Per-channel Haar bands of an RGB image as a (12, H/2, W/2) tensor."""
    arr = _as_image(img, channels=3)
    return np.concatenate([dwt2_haar(arr[c]).as_array() for c in range(3)])


def unstack(X) -> np.ndarray:
    """Inverse of stack: (12, H/2, W/2) tensor back to a (3, H, W) image."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[0] != 12:
        raise ValidationError(f"expected a 12-channel stack, got shape {X.shape}")
    return np.stack([idwt2_haar(WaveletBands(*X[4 * c : 4 * c + 4])) for c in range(3)])


def gray_wavelet(y) -> WaveletBands:
    """Haar bands of a grayscale image (1, H, W)."""
    arr = _as_image(y, channels=1)
    return dwt2_haar(arr[0])


def gray_project(X, op: GrayOp) -> np.ndarray:
    """Apply the gray op across the color channels of a stack, bandwise.

    Returns a (4, H/2, W/2) array: the gray image's bands when the stack
    came from an RGB image (forward model and Haar commute).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[0] != 12:
        raise ValidationError(f"expected a 12-channel stack, got shape {X.shape}")
    w = np.asarray(op.weights, dtype=np.float64)
    return np.tensordot(w, X.reshape(3, 4, *X.shape[1:]), axes=(0, 0))
