"""Binary tensor files for wavelet stacks and bands.

Layout: magic b"WACM", format version (u32 LE), rank (u32 LE), one u32 LE
per dimension, then the values as little-endian float64 in channel-major
row-major order.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError

MAGIC = b"WACM"
VERSION = 1

__all__ = ["save_tensor", "load_tensor", "MAGIC", "VERSION"]


def save_tensor(arr, path) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.astype("<f8").tobytes())


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise FormatError(f"bad tensor magic {data[:4]!r}")
    if len(data) < 12:
        raise FormatError("truncated tensor header")
    version, rank = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported tensor format version {version}")
    if len(data) < 12 + 4 * rank:
        raise FormatError("truncated tensor header")
    shape = struct.unpack_from(f"<{rank}I", data, 12)
    payload = data[12 + 4 * rank :]
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    if len(payload) != 8 * count:
        raise FormatError("truncated tensor payload")
    return np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
