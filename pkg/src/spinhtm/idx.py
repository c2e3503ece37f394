"""Bit-exact reader/writer for the IDX format used by the MNIST files.

Layout: 4-byte big-endian magic (0x00000803 images / 0x00000801 labels),
big-endian 4-byte dimension fields, then the unsigned-byte payload.
Gzip-compressed files are accepted via transparent decompression.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, DimensionOverflow, IdxFormatError, TruncatedFile
from .images import Image

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# Sanity cap on any single declared dimension and on the total payload.
_MAX_DIM = 1 << 31


def parse_idx_images(data: bytes) -> list[Image]:
    """Decode an IDX image file into a list of 8-bit images."""
    magic = _read_magic(data)
    if magic != IMAGE_MAGIC:
        raise BadMagic(f"expected image magic 0x{IMAGE_MAGIC:08x}, got 0x{magic:08x}")
    if len(data) < 16:
        raise TruncatedFile("image header needs 16 bytes")
    count, rows, cols = struct.unpack(">III", data[4:16])
    for name, dim in (("count", count), ("rows", rows), ("cols", cols)):
        if dim >= _MAX_DIM:
            raise DimensionOverflow(f"{name}={dim} is not a plausible dimension")
    total = count * rows * cols
    if total >= _MAX_DIM:
        raise DimensionOverflow(f"payload of {total} bytes is not plausible")
    payload = data[16:]
    if len(payload) < total:
        raise TruncatedFile(f"need {total} payload bytes, have {len(payload)}")
    if len(payload) > total:
        raise IdxFormatError(f"{len(payload) - total} trailing bytes after payload")
    raster = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)
    return [Image(raster[i].copy(), bits=8) for i in range(count)]


def parse_idx_labels(data: bytes) -> list[int]:
    """Decode an IDX label file into a list of digits in [0, 9]."""
    magic = _read_magic(data)
    if magic != LABEL_MAGIC:
        raise BadMagic(f"expected label magic 0x{LABEL_MAGIC:08x}, got 0x{magic:08x}")
    if len(data) < 8:
        raise TruncatedFile("label header needs 8 bytes")
    (count,) = struct.unpack(">I", data[4:8])
    if count >= _MAX_DIM:
        raise DimensionOverflow(f"count={count} is not a plausible dimension")
    payload = data[8:]
    if len(payload) < count:
        raise TruncatedFile(f"need {count} payload bytes, have {len(payload)}")
    if len(payload) > count:
        raise IdxFormatError(f"{len(payload) - count} trailing bytes after payload")
    labels = list(payload[:count])
    bad = [v for v in labels if v > 9]
    if bad:
        raise IdxFormatError(f"labels outside [0, 9]: {sorted(set(bad))[:5]}")
    return labels


def parse_idx(data: bytes):
    """Dispatch on the magic number; returns images or labels."""
    magic = _read_magic(data)
    if magic == IMAGE_MAGIC:
        return parse_idx_images(data)
    if magic == LABEL_MAGIC:
        return parse_idx_labels(data)
    raise BadMagic(f"unknown IDX magic 0x{magic:08x}")


def write_idx_images(images: list[Image]) -> bytes:
    """Encode images back to IDX bytes; inverse of parse_idx_images."""
    if not images:
        raise ValueError("cannot serialize an empty image set")
    rows, cols = images[0].pixels.shape
    for img in images:
        if img.pixels.shape != (rows, cols):
            raise ValueError("all images in an IDX file must share dimensions")
    header = struct.pack(">IIII", IMAGE_MAGIC, len(images), rows, cols)
    payload = b"".join(img.pixels.astype(np.uint8).tobytes() for img in images)
    return header + payload


def write_idx_labels(labels: list[int]) -> bytes:
    header = struct.pack(">II", LABEL_MAGIC, len(labels))
    return header + bytes(int(v) for v in labels)


def load_idx(path) -> bytes:
    """Read raw IDX bytes from a file, decompressing gzip transparently."""
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def load_idx_images(path) -> list[Image]:
    return parse_idx_images(load_idx(path))


def load_idx_labels(path) -> list[int]:
    return parse_idx_labels(load_idx(path))


def _read_magic(data: bytes) -> int:
    if len(data) < 4:
        raise TruncatedFile("fewer than 4 bytes, no magic number")
    return struct.unpack(">I", data[:4])[0]
