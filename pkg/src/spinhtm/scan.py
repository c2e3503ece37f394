"""Training-sequence generation: smooth shift/rotate/scale scans of an image.

A sequence walks the (shift, rotation, scale) grid so that consecutive
frames differ by exactly one atomic step: shifts traverse their grid in
boustrophedon (zigzag) order, and the rotation and scale axes are likewise
traversed back and forth so no coordinate ever jumps at a block boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .images import Image, transform_image


@dataclass(frozen=True)
class ScanParams:
    """Geometry of the scan grid driving sequence generation."""

    max_shift: int = 2
    shift_step: int = 1
    rotation_range: float = 10.0
    rotation_step: float = 5.0
    scale_levels: tuple[float, ...] = (0.9, 1.0, 1.1)

    def __post_init__(self):
        if self.shift_step < 1:
            raise ValueError("shift_step must be >= 1")
        if self.rotation_range > 0 and self.rotation_step <= 0:
            raise ValueError("rotation_step must be > 0")
        if any(s <= 0 for s in self.scale_levels):
            raise ValueError("scale factors must be positive")
        if not self.scale_levels:
            raise ValueError("need at least one scale level")

    def shift_offsets(self) -> list[int]:
        return list(range(-self.max_shift, self.max_shift + 1, self.shift_step))

    def rotations(self) -> list[float]:
        if self.rotation_range <= 0:
            return [0.0]
        n = int(round(self.rotation_range / self.rotation_step))
        return [i * self.rotation_step for i in range(-n, n + 1)]

    def frame_count(self) -> int:
        n_shift = len(self.shift_offsets()) ** 2
        return n_shift * len(self.rotations()) * len(self.scale_levels)


IDENTITY_SCAN = ScanParams(max_shift=0, rotation_range=0.0, scale_levels=(1.0,))


@dataclass(frozen=True)
class TransformStep:
    """The atomic transform applied to the source image for one frame."""

    dx: int
    dy: int
    angle: float
    scale: float


@dataclass
class TrainingSequence:
    """Ordered frames derived from one source image, with its class label."""

    frames: list[Image]
    label: int | None = None
    source_id: str = ""
    steps: list[TransformStep] = field(default_factory=list)

    def __post_init__(self):
        if not self.frames:
            raise ValueError("a training sequence cannot be empty")
        shape = self.frames[0].pixels.shape
        if any(f.pixels.shape != shape for f in self.frames):
            raise ValueError("all frames must share dimensions")

    def __len__(self) -> int:
        return len(self.frames)


def _zigzag_grid(offsets: list[int]) -> list[tuple[int, int]]:
    """Row-major boustrophedon walk over the (dy, dx) shift grid."""
    out = []
    for r, dy in enumerate(offsets):
        row = [(dy, dx) for dx in offsets]
        if r % 2 == 1:
            row.reverse()
        out.extend(row)
    return out


def _scan_order(params: ScanParams) -> list[tuple[tuple[int, int], float, float]]:
    """Full (shift, rotation, scale) visit order with single-step adjacency.

    Scale is the outermost loop; the rotation sequence reverses on every
    scale advance and the shift walk reverses on every rotation advance, so
    consecutive visits change exactly one coordinate by one step.
    """
    shifts = _zigzag_grid(params.shift_offsets())
    rotations = params.rotations()
    order = []
    shift_forward = True
    for s_i, scale in enumerate(params.scale_levels):
        rot_seq = rotations if s_i % 2 == 0 else list(reversed(rotations))
        for angle in rot_seq:
            walk = shifts if shift_forward else list(reversed(shifts))
            order.extend(((dy, dx), angle, scale) for dy, dx in walk)
            shift_forward = not shift_forward
    return order


def generate_training_sequence(img: Image, params: ScanParams,
                               label: int | None = None,
                               source_id: str = "") -> TrainingSequence:
    """Render the scan of one image into a smooth training sequence."""
    frames = []
    steps = []
    for (dy, dx), angle, scale in _scan_order(params):
        frames.append(transform_image(img, dx=dx, dy=dy, angle_deg=angle,
                                      scale=scale))
        steps.append(TransformStep(dx=dx, dy=dy, angle=angle, scale=scale))
    return TrainingSequence(frames=frames, label=label, source_id=source_id,
                            steps=steps)
