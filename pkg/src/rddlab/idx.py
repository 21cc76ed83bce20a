"""Reader for the IDX binary format used by the classic digit datasets.

Big-endian layout: a 4-byte magic (0x00000803 for uint8 image tensors,
0x00000801 for uint8 label vectors), the dimension sizes as uint32, then
raw bytes. Files may be gzip-compressed; this is sniffed, not inferred
from the name.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import IdxFormatError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx_images(path) -> np.ndarray:
    """Return a (count, rows, cols) uint8 array."""
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise IdxFormatError(f"{path}: truncated header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGE_MAGIC:
        raise IdxFormatError(f"{path}: magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}")
    expected = 16 + count * rows * cols
    if len(raw) != expected:
        raise IdxFormatError(f"{path}: {len(raw)} bytes, expected {expected}")
    return np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(count, rows, cols).copy()


def read_idx_labels(path) -> np.ndarray:
    """Return a (count,) uint8 array."""
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise IdxFormatError(f"{path}: truncated header")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != LABEL_MAGIC:
        raise IdxFormatError(f"{path}: magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}")
    if len(raw) != 8 + count:
        raise IdxFormatError(f"{path}: {len(raw)} bytes, expected {8 + count}")
    return np.frombuffer(raw, dtype=np.uint8, offset=8).copy()
