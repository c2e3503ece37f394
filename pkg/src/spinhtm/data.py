"""Digit corpus plumbing for the experiment harness.

Experiments consume IDX files. When the canonical MNIST files are on disk
(point `SPINHTM_MNIST_DIR` or the config at them) they are used directly;
otherwise `ensure_digits_idx` materializes an IDX-format corpus from the
scikit-learn handwritten-digits set so the full pipeline (IDX parsing,
rescale, quantize, scan) runs end to end without a download.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .idx import (load_idx_images, load_idx_labels, write_idx_images,
                  write_idx_labels)
from .images import Image, quantize_image, scale_image
from .scan import ScanParams, TrainingSequence, generate_training_sequence

MNIST_TRAIN_IMAGES = "train-images-idx3-ubyte"
MNIST_TRAIN_LABELS = "train-labels-idx1-ubyte"
MNIST_TEST_IMAGES = "t10k-images-idx3-ubyte"
MNIST_TEST_LABELS = "t10k-labels-idx1-ubyte"


@dataclass
class DigitCorpus:
    train_images: list[Image]
    train_labels: list[int]
    test_images: list[Image]
    test_labels: list[int]
    source: str


def find_mnist_dir() -> Path | None:
    env = os.environ.get("SPINHTM_MNIST_DIR")
    if env and _has_mnist(Path(env)):
        return Path(env)
    return None


def _has_mnist(base: Path) -> bool:
    return all(
        (base / name).exists() or (base / f"{name}.gz").exists()
        for name in (MNIST_TRAIN_IMAGES, MNIST_TRAIN_LABELS,
                     MNIST_TEST_IMAGES, MNIST_TEST_LABELS))


def _mnist_path(base: Path, name: str) -> Path:
    plain = base / name
    return plain if plain.exists() else base / f"{name}.gz"


def ensure_digits_idx(out_dir) -> dict[str, Path]:
    """Write the scikit-learn digits set as four IDX files, MNIST-style.

    The 8x8 grey images (17 levels) are rescaled to 8-bit so downstream
    quantization behaves exactly as it would for MNIST rasters.
    """
    from sklearn.datasets import load_digits

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "train_images": out_dir / f"{MNIST_TRAIN_IMAGES}.gz",
        "train_labels": out_dir / f"{MNIST_TRAIN_LABELS}.gz",
        "test_images": out_dir / f"{MNIST_TEST_IMAGES}.gz",
        "test_labels": out_dir / f"{MNIST_TEST_LABELS}.gz",
    }
    if all(p.exists() for p in paths.values()):
        return paths

    digits = load_digits()
    rasters = np.floor(digits.images / 16.0 * 255.0 + 0.5).astype(np.uint8)
    labels = digits.target.astype(int)
    # alternate samples into train/test halves, preserving per-class order
    train_idx = np.arange(0, len(labels), 2)
    test_idx = np.arange(1, len(labels), 2)

    import gzip

    def dump(path: Path, payload: bytes):
        path.write_bytes(gzip.compress(payload, compresslevel=6, mtime=0))

    dump(paths["train_images"],
         write_idx_images([Image(rasters[i], bits=8) for i in train_idx]))
    dump(paths["train_labels"],
         write_idx_labels([int(labels[i]) for i in train_idx]))
    dump(paths["test_images"],
         write_idx_images([Image(rasters[i], bits=8) for i in test_idx]))
    dump(paths["test_labels"],
         write_idx_labels([int(labels[i]) for i in test_idx]))
    return paths


def load_corpus(dataset_dir=None, cache_dir=None) -> DigitCorpus:
    """Load a digit corpus from IDX files, preferring real MNIST."""
    base = Path(dataset_dir) if dataset_dir else find_mnist_dir()
    if base is not None and _has_mnist(Path(base)):
        base = Path(base)
        return DigitCorpus(
            train_images=load_idx_images(_mnist_path(base, MNIST_TRAIN_IMAGES)),
            train_labels=load_idx_labels(_mnist_path(base, MNIST_TRAIN_LABELS)),
            test_images=load_idx_images(_mnist_path(base, MNIST_TEST_IMAGES)),
            test_labels=load_idx_labels(_mnist_path(base, MNIST_TEST_LABELS)),
            source=f"mnist:{base}")
    cache = Path(cache_dir) if cache_dir else Path.home() / ".cache" / "spinhtm"
    paths = ensure_digits_idx(cache)
    return DigitCorpus(
        train_images=load_idx_images(paths["train_images"]),
        train_labels=load_idx_labels(paths["train_labels"]),
        test_images=load_idx_images(paths["test_images"]),
        test_labels=load_idx_labels(paths["test_labels"]),
        source=f"digits:{cache}")


def prepare_image(img: Image, height: int, width: int, bits: int) -> Image:
    """Field-sized, bit-depth-reduced version of a raw corpus image."""
    scaled = scale_image(img, target_w=width, target_h=height)
    if bits < scaled.bits:
        return quantize_image(scaled, bits)
    return scaled


def select_per_class(images: list[Image], labels: list[int], per_class: int,
                     n_classes: int = 10, skip: int = 0
                     ) -> tuple[list[Image], list[int]]:
    """First `per_class` samples of each class, after skipping `skip` each."""
    chosen: list[int] = []
    seen = {c: 0 for c in range(n_classes)}
    for i, lab in enumerate(labels):
        if lab >= n_classes:
            continue
        seen[lab] += 1
        if skip < seen[lab] <= skip + per_class:
            chosen.append(i)
    counts = {c: 0 for c in range(n_classes)}
    for i in chosen:
        counts[labels[i]] += 1
    short = {c: n for c, n in counts.items() if n < per_class}
    if short:
        raise ValueError(f"not enough samples for classes {sorted(short)}")
    return [images[i] for i in chosen], [labels[i] for i in chosen]


def build_training_sequences(images: list[Image], labels: list[int],
                             params: ScanParams, height: int, width: int,
                             bits: int) -> list[TrainingSequence]:
    sequences = []
    for n, (img, label) in enumerate(zip(images, labels)):
        prepared = prepare_image(img, height, width, bits)
        sequences.append(generate_training_sequence(
            prepared, params, label=label, source_id=f"img{n:05d}"))
    return sequences
