"""Small synthetic datasets for training and evaluating the pipeline.

Three generators: constant-color images with distinct gray levels,
two-tone striped textures, and metamer pairs (distinct colors that share
the same grayscale under a given forward model).
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .imaging import MEAN, GrayOp

__all__ = ["constant_colors", "two_tone", "metamer_pair", "constant_image", "striped_image"]


def constant_image(color, size: int) -> np.ndarray:
    color = np.asarray(color, dtype=np.float64)
    return np.broadcast_to(color[:, None, None], (3, size, size)).copy()


def striped_image(color_a, color_b, size: int, horizontal: bool = False) -> np.ndarray:
    """Alternating 1-pixel stripes of two colors (strong high-frequency content)."""
    img = np.empty((3, size, size), dtype=np.float64)
    a = np.asarray(color_a, dtype=np.float64)[:, None, None]
    b = np.asarray(color_b, dtype=np.float64)[:, None, None]
    if horizontal:
        img[:, 0::2, :] = a
        img[:, 1::2, :] = b
    else:
        img[:, :, 0::2] = a
        img[:, :, 1::2] = b
    return img


def _null_direction(op: GrayOp, rng) -> np.ndarray:
    """Random unit vector orthogonal to the gray-op weights (gray-preserving)."""
    w = np.asarray(op.weights, dtype=np.float64)
    for _ in range(64):
        d = rng.standard_normal(3)
        d -= (d @ w) / (w @ w) * w
        norm = np.linalg.norm(d)
        if norm > 1e-6:
            return d / norm
    raise ValidationError("failed to draw a gray-preserving direction")


def constant_colors(count: int, size: int, rng, op: GrayOp = MEAN):
    """Constant-color images whose gray levels are distinct and evenly spaced.

    Returns (images, colors).  Each color sits at gray level
    (k+1)/(count+1) with a random gray-preserving chroma offset.
    """
    if count < 1 or size < 2 or size % 2:
        raise ValidationError("count >= 1 and even size >= 2 required")
    # keep chroma offsets well below the gray spacing so the gray level is
    # the dominant separating feature of the modes
    gap = 1.0 / (count + 1)
    chroma = 0.35 * gap
    images, colors = [], []
    for k in range(count):
        g = (k + 1) * gap
        d = _null_direction(op, rng)
        # shrink if needed to keep all components inside [0.02, 0.98]
        limit = np.inf
        for di, base in zip(d, (g, g, g)):
            if di > 1e-12:
                limit = min(limit, (0.98 - base) / di)
            elif di < -1e-12:
                limit = min(limit, (0.02 - base) / di)
        t = min(chroma, 0.9 * max(limit, 0.0))
        color = np.array([g, g, g]) + t * d
        colors.append(color)
        images.append(constant_image(color, size))
    return images, colors


def two_tone(count: int, size: int, rng, op: GrayOp = MEAN):
    """Striped two-tone textures whose tones differ only in gray level.

    Both tones of a texture share one chroma offset, so the texture's
    high-frequency content is purely gray: each color channel's detail
    coefficients then have the same mean as the grayscale's bands.
    """
    if count < 1 or size < 2 or size % 2:
        raise ValidationError("count >= 1 and even size >= 2 required")
    images, colors = [], []
    for k in range(count):
        g_a = 0.25 + 0.2 * (k / max(count - 1, 1))
        g_b = min(g_a + 0.3, 0.9)
        offset = 0.12 * _null_direction(op, rng)
        color_a = np.clip(np.array([g_a] * 3) + offset, 0.02, 0.98)
        color_b = np.clip(np.array([g_b] * 3) + offset, 0.02, 0.98)
        images.append(striped_image(color_a, color_b, size, horizontal=bool(k % 2)))
        colors.append((color_a, color_b))
    return images, colors


def metamer_pair(size: int, op: GrayOp = MEAN):
    """Two constant colors sharing the same gray level under the op.

    Under the mean op the canonical pair (0.9, 0.3, 0.3) / (0.3, 0.9, 0.3)
    both project to gray 0.5.
    """
    if op.kind == "mean":
        colors = [np.array([0.9, 0.3, 0.3]), np.array([0.3, 0.9, 0.3])]
    else:
        w = np.asarray(op.weights, dtype=np.float64)
        base = np.array([0.5, 0.5, 0.5])
        d = np.array([1.0, -1.0, 0.0])
        d -= (d @ w) / (w @ w) * w
        d /= np.linalg.norm(d)
        colors = [base + 0.3 * d, base - 0.3 * d]
    return [constant_image(c, size) for c in colors], colors
