"""Tree wiring of the node hierarchy over a rectangular visual field.

Level 1 tiles the field with non-overlapping square patches, one node per
patch. Higher levels group child nodes 2x2 while both grid dimensions stay
even, and a final level with a single output node absorbs whatever grid
remains. Every child has exactly one parent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TopologyMismatch


@dataclass(frozen=True)
class NetworkTopology:
    height: int
    width: int
    patch: int
    grids: tuple[tuple[int, int], ...]            # node-grid shape per level
    children: tuple[tuple[tuple[int, ...], ...], ...]  # per level >= 2

    @classmethod
    def build(cls, height: int = 16, width: int = 16, patch: int = 4
              ) -> "NetworkTopology":
        if height % patch or width % patch:
            raise TopologyMismatch(
                f"{patch}x{patch} patches do not tile a {height}x{width} field")
        grid = (height // patch, width // patch)
        grids = [grid]
        children: list[tuple[tuple[int, ...], ...]] = []
        while grids[-1] != (1, 1):
            rows, cols = grids[-1]
            if rows % 2 == 0 and cols % 2 == 0 and (rows, cols) != (2, 2):
                nrows, ncols = rows // 2, cols // 2
                level = []
                for pr in range(nrows):
                    for pc in range(ncols):
                        level.append(tuple(
                            (2 * pr + dr) * cols + (2 * pc + dc)
                            for dr in range(2) for dc in range(2)))
                children.append(tuple(level))
                grids.append((nrows, ncols))
            else:
                children.append((tuple(range(rows * cols)),))
                grids.append((1, 1))
        return cls(height=height, width=width, patch=patch,
                   grids=tuple(grids), children=tuple(children))

    @property
    def n_levels(self) -> int:
        return len(self.grids)

    @property
    def nodes_per_level(self) -> tuple[int, ...]:
        return tuple(r * c for r, c in self.grids)

    def level_children(self, level: int) -> tuple[tuple[int, ...], ...]:
        """Child indices for each node of a level (levels are 1-based)."""
        if level < 2 or level > self.n_levels:
            raise TopologyMismatch(f"level {level} has no child wiring")
        return self.children[level - 2]

    def patch_bounds(self, node_idx: int) -> tuple[int, int, int, int]:
        """(r0, r1, c0, c1) pixel window of one level-1 node."""
        rows, cols = self.grids[0]
        if not 0 <= node_idx < rows * cols:
            raise TopologyMismatch(f"no level-1 node {node_idx}")
        pr, pc = divmod(node_idx, cols)
        r0, c0 = pr * self.patch, pc * self.patch
        return r0, r0 + self.patch, c0, c0 + self.patch

    def extract_patches(self, frames: np.ndarray) -> np.ndarray:
        """(n_frames, H, W) -> (n_level1_nodes, n_frames, patch*patch)."""
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim == 2:
            frames = frames[None, :, :]
        if frames.shape[1:] != (self.height, self.width):
            raise TopologyMismatch(
                f"frames are {frames.shape[1:]}, field is "
                f"({self.height}, {self.width})")
        out = []
        for idx in range(self.nodes_per_level[0]):
            r0, r1, c0, c1 = self.patch_bounds(idx)
            out.append(frames[:, r0:r1, c0:c1].reshape(frames.shape[0], -1))
        return np.stack(out, axis=0)

    def as_dict(self) -> dict:
        return {"height": self.height, "width": self.width, "patch": self.patch}
