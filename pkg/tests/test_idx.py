import gzip
import struct

import numpy as np
import pytest

from spinhtm.errors import BadMagic, DimensionOverflow, IdxFormatError, \
    TruncatedFile
from spinhtm.idx import (IMAGE_MAGIC, LABEL_MAGIC, load_idx, parse_idx,
                         parse_idx_images, parse_idx_labels, write_idx_images,
                         write_idx_labels)
from spinhtm.images import Image


def image_bytes(count, rows, cols, payload=None):
    header = struct.pack(">IIII", IMAGE_MAGIC, count, rows, cols)
    if payload is None:
        payload = bytes(count * rows * cols)
    return header + payload


def test_single_zero_image():
    images = parse_idx_images(image_bytes(1, 28, 28))
    assert len(images) == 1
    assert images[0].pixels.shape == (28, 28)
    assert not images[0].pixels.any()
    assert images[0].bits == 8


def test_labels_roundtrip_values():
    data = struct.pack(">II", LABEL_MAGIC, 3) + bytes([5, 0, 9])
    assert parse_idx_labels(data) == [5, 0, 9]


def test_parse_dispatches_on_magic():
    labels = parse_idx(struct.pack(">II", LABEL_MAGIC, 1) + b"\x07")
    assert labels == [7]
    images = parse_idx(image_bytes(2, 3, 3))
    assert len(images) == 2


def test_bad_magic():
    with pytest.raises(BadMagic):
        parse_idx(struct.pack(">I", 0xDEADBEEF) + bytes(100))


def test_truncated_payload():
    data = image_bytes(2, 4, 4)[:-3]
    with pytest.raises(TruncatedFile):
        parse_idx_images(data)


def test_truncated_header():
    with pytest.raises(TruncatedFile):
        parse_idx(b"\x00\x00")


def test_trailing_bytes_rejected():
    with pytest.raises(IdxFormatError):
        parse_idx_images(image_bytes(1, 2, 2) + b"\x00")


def test_dimension_overflow():
    header = struct.pack(">IIII", IMAGE_MAGIC, 0xFFFFFFF0, 28, 28)
    with pytest.raises(DimensionOverflow):
        parse_idx_images(header + bytes(16))


def test_label_range_enforced():
    data = struct.pack(">II", LABEL_MAGIC, 2) + bytes([3, 12])
    with pytest.raises(IdxFormatError):
        parse_idx_labels(data)


def test_image_roundtrip_bit_exact():
    rng = np.random.default_rng(7)
    raw = image_bytes(5, 9, 7, payload=rng.integers(
        0, 256, size=5 * 9 * 7, dtype=np.uint8).tobytes())
    images = parse_idx_images(raw)
    assert write_idx_images(images) == raw


def test_label_roundtrip_bit_exact():
    raw = struct.pack(">II", LABEL_MAGIC, 4) + bytes([1, 2, 3, 4])
    assert write_idx_labels(parse_idx_labels(raw)) == raw


def test_gzip_transparent(tmp_path):
    raw = image_bytes(2, 4, 4, payload=bytes(range(32)))
    path = tmp_path / "imgs.gz"
    path.write_bytes(gzip.compress(raw))
    assert load_idx(path) == raw


def test_write_requires_uniform_shapes():
    a = Image(np.zeros((4, 4), dtype=np.uint8))
    b = Image(np.zeros((5, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        write_idx_images([a, b])


def test_official_mnist_counts_when_available():
    from spinhtm.data import MNIST_TRAIN_IMAGES, find_mnist_dir
    from spinhtm.idx import load_idx_images

    base = find_mnist_dir()
    if base is None:
        pytest.skip("canonical MNIST files not present in this environment")
    images = load_idx_images(base / MNIST_TRAIN_IMAGES)
    assert len(images) == 60000
    assert images[0].pixels.shape == (28, 28)
