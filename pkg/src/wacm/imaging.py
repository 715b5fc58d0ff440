"""Image representation, grayscale forward models and raster file I/O.

Images are float64 numpy arrays of shape (channels, height, width) with
channels 1 or 3.  Intensities live nominally in [0, 1]; intermediate
results may leave that range and are clamped only when written to disk.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ValidationError

__all__ = [
    "GrayOp",
    "MEAN",
    "LUMA",
    "LUMA_CORRECTED",
    "gray_op_by_name",
    "to_gray",
    "clamp",
    "load_raster",
    "save_raster",
]


@dataclass(frozen=True)
class GrayOp:
    """Linear pixelwise map from RGB to a single gray intensity."""

    kind: str
    weights: tuple[float, float, float]

    def __post_init__(self):
        if len(self.weights) != 3 or any(w <= 0 for w in self.weights):
            raise ValidationError("gray-op weights must be three positive reals")


MEAN = GrayOp("mean", (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0))
# Literal coefficients, 0.58 included; the corrected variant uses 0.587.
LUMA = GrayOp("luma", (0.299, 0.58, 0.114))
LUMA_CORRECTED = GrayOp("luma-corrected", (0.299, 0.587, 0.114))

_OPS = {op.kind: op for op in (MEAN, LUMA, LUMA_CORRECTED)}


def gray_op_by_name(name: str) -> GrayOp:
    try:
        return _OPS[name]
    except KeyError:
        raise ValidationError(f"unknown gray op {name!r}; choose from {sorted(_OPS)}") from None


def _as_image(img, channels=None) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] not in (1, 3):
        raise ValidationError(f"expected array of shape (1|3, H, W), got {arr.shape}")
    if channels is not None and arr.shape[0] != channels:
        raise ValidationError(f"expected {channels} channels, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("image contains non-finite values")
    return arr


def to_gray(img, op: GrayOp = MEAN) -> np.ndarray:
    """Apply the linear forward model pixelwise; (3,H,W) -> (1,H,W)."""
    arr = _as_image(img, channels=3)
    w = np.asarray(op.weights, dtype=np.float64)
    return np.tensordot(w, arr, axes=(0, 0))[np.newaxis]


def clamp(img, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Clip every value into [lo, hi]; idempotent."""
    if lo > hi:
        raise ValidationError(f"clamp bounds out of order: {lo} > {hi}")
    return np.clip(np.asarray(img, dtype=np.float64), lo, hi)


# --- PGM/PPM (binary, maxval 255) and 8-bit PNG ------------------------------

def _read_pnm_tokens(data: bytes, n: int, start: int):
    """Read n whitespace-delimited header tokens, skipping # comments."""
    tokens = []
    i = start
    while len(tokens) < n:
        if i >= len(data):
            raise FormatError("truncated PNM header")
        ch = data[i : i + 1]
        if ch.isspace():
            i += 1
        elif ch == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    return tokens, i


def _load_pnm(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise FormatError(f"unsupported PNM magic {magic!r}")
    tokens, pos = _read_pnm_tokens(data, 3, 2)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError("non-numeric PNM header field") from None
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}, only 255")
    if width < 2 or height < 2:
        raise FormatError(f"image too small: {width}x{height}")
    pos += 1  # single whitespace byte after maxval
    payload = data[pos : pos + width * height * channels]
    if len(payload) != width * height * channels:
        raise FormatError("truncated PNM payload")
    raw = np.frombuffer(payload, dtype=np.uint8)
    planes = raw.reshape(height, width, channels).transpose(2, 0, 1)
    return planes.astype(np.float64) / 255.0


def load_raster(path) -> np.ndarray:
    """Load a PGM/PPM/PNG file; bytes map to v/255 exactly."""
    path = str(path)
    if path.lower().endswith(".png"):
        from PIL import Image as PILImage

        with PILImage.open(path) as im:
            if im.mode not in ("L", "RGB"):
                raise FormatError(f"unsupported PNG mode {im.mode!r}, only 8-bit L/RGB")
            arr = np.asarray(im, dtype=np.uint8)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        return arr.transpose(2, 0, 1).astype(np.float64) / 255.0
    with open(path, "rb") as fh:
        return _load_pnm(fh.read())


def _quantize(img: np.ndarray) -> np.ndarray:
    return np.rint(clamp(img) * 255.0).astype(np.uint8)


def save_raster(img, path) -> None:
    """Write an image as binary PGM/PPM or 8-bit PNG, clamping to [0,1]."""
    arr = _as_image(img)
    path = str(path)
    bytes8 = _quantize(arr)
    if path.lower().endswith(".png"):
        from PIL import Image as PILImage

        hwc = bytes8.transpose(1, 2, 0)
        mode = "RGB" if arr.shape[0] == 3 else "L"
        PILImage.fromarray(hwc.squeeze(-1) if mode == "L" else hwc, mode=mode).save(path)
        return
    magic = b"P6" if arr.shape[0] == 3 else b"P5"
    if path.lower().endswith(".ppm") and arr.shape[0] != 3:
        raise ValidationError("PPM requires a 3-channel image")
    if path.lower().endswith(".pgm") and arr.shape[0] != 1:
        raise ValidationError("PGM requires a 1-channel image")
    _, height, width = arr.shape
    buf = io.BytesIO()
    buf.write(magic + b"\n%d %d\n255\n" % (width, height))
    buf.write(bytes8.transpose(1, 2, 0).tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())
