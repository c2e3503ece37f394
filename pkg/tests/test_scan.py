import numpy as np
import pytest

from spinhtm.images import Image
from spinhtm.scan import (IDENTITY_SCAN, ScanParams, generate_training_sequence)


def digit_like(seed=0, h=16, w=16):
    rng = np.random.default_rng(seed)
    px = np.zeros((h, w), dtype=np.uint8)
    px[4:12, 5:11] = rng.integers(0, 2, size=(8, 6)).astype(np.uint8)
    return Image(px, bits=1)


def test_identity_scan_single_frame():
    img = digit_like()
    seq = generate_training_sequence(img, IDENTITY_SCAN, label=3)
    assert len(seq) == 1
    assert seq.frames[0] == img
    assert seq.label == 3


def test_shift_only_count():
    params = ScanParams(max_shift=2, shift_step=1, rotation_range=0.0,
                        scale_levels=(1.0,))
    assert params.frame_count() == 25
    seq = generate_training_sequence(digit_like(), params)
    assert len(seq) == 25


def test_full_grid_count():
    params = ScanParams(max_shift=1, shift_step=1, rotation_range=5.0,
                        rotation_step=5.0, scale_levels=(0.9, 1.0))
    assert params.frame_count() == 9 * 3 * 2 == 54
    seq = generate_training_sequence(digit_like(), params)
    assert len(seq) == 54


def test_default_scan_count():
    assert ScanParams().frame_count() == 25 * 5 * 3


def test_smoothness_exactly_one_axis_steps():
    params = ScanParams(max_shift=1, shift_step=1, rotation_range=10.0,
                        rotation_step=5.0, scale_levels=(0.9, 1.0, 1.1))
    seq = generate_training_sequence(digit_like(), params)
    shift_step = params.shift_step
    rotations = params.rotations()
    scales = list(params.scale_levels)
    for a, b in zip(seq.steps, seq.steps[1:]):
        d_shift = abs(a.dx - b.dx) + abs(a.dy - b.dy)
        d_rot = abs(rotations.index(a.angle) - rotations.index(b.angle))
        d_scale = abs(scales.index(a.scale) - scales.index(b.scale))
        changes = [d_shift > 0, d_rot > 0, d_scale > 0]
        assert sum(changes) == 1, f"{a} -> {b}"
        assert d_shift in (0, shift_step)
        assert d_rot in (0, 1)
        assert d_scale in (0, 1)


def test_zero_image_all_frames_zero():
    img = Image(np.zeros((16, 16), dtype=np.uint8), bits=1)
    seq = generate_training_sequence(img, ScanParams())
    assert all(not f.pixels.any() for f in seq.frames)


def test_frames_share_shape_and_depth():
    seq = generate_training_sequence(digit_like(), ScanParams(max_shift=1))
    assert all(f.pixels.shape == (16, 16) for f in seq.frames)
    assert all(f.bits == 1 for f in seq.frames)


def test_param_validation():
    with pytest.raises(ValueError):
        ScanParams(shift_step=0)
    with pytest.raises(ValueError):
        ScanParams(rotation_range=5.0, rotation_step=0.0)
    with pytest.raises(ValueError):
        ScanParams(scale_levels=(0.0,))
    with pytest.raises(ValueError):
        ScanParams(scale_levels=())
