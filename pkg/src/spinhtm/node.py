"""One processing node: spatial pool, transition statistics, temporal
groups, and the quantized inference matrix, plus the two-stage inference
chain run against a compute backend.

Training is count-based and deterministic. Inference computes a density
over stored patterns (raw dot products), marginalizes it over the temporal
groups through the inference matrix, and picks the winner; the output node
replaces the pattern density with a one-hot of its best match and maps it
to class densities instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (EmptyPool, IndexOutOfRange, LengthMismatch, NotOutputNode,
                     UntrainedNetwork)

_INITIAL_CAPACITY = 64


def spatial_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized dot product in [0, 1]; zero if either vector is zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"vector shapes differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def quantize_matrix(m: np.ndarray, bits: int) -> np.ndarray:
    """Snap entries onto the (2**bits - 1)-level grid spanning [0, max(m)].

    Scaling by the matrix maximum mirrors how the weights are later coded
    into conductances, so the stored matrix and its hardware image share a
    dynamic range.
    """
    levels = (1 << bits) - 1
    scale = float(m.max())
    if scale <= 0:
        return np.zeros_like(m)
    return np.floor(m / scale * levels + 0.5) * (scale / levels)


@dataclass
class NodeOutput:
    """Result of one node inference."""

    y: np.ndarray
    group_density: np.ndarray
    winner: int
    dom: float
    has_evidence: bool
    rejected: bool = False


class HtmNode:
    """Spatial/temporal memory of one node in the hierarchy."""

    def __init__(self, input_dim: int, matching_threshold: float = 0.7,
                 max_group_size: int = 10, weight_bits: int = 5,
                 is_output: bool = False, n_classes: int = 0,
                 input_kind: str = "pixels"):
        if input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if not 0.0 <= matching_threshold <= 1.0:
            raise ValueError("matching_threshold must be in [0, 1]")
        if max_group_size < 1:
            raise ValueError("max_group_size must be >= 1")
        if is_output and n_classes < 1:
            raise ValueError("output node needs n_classes >= 1")
        if input_kind not in ("pixels", "children"):
            raise ValueError("input_kind must be 'pixels' or 'children'")
        self.input_dim = input_dim
        self.matching_threshold = matching_threshold
        self.max_group_size = max_group_size
        self.weight_bits = weight_bits
        self.is_output = is_output
        self.n_classes = n_classes if is_output else 0
        self.input_kind = input_kind

        self._store = np.zeros((_INITIAL_CAPACITY, input_dim), dtype=np.float64)
        self._norms = np.zeros(_INITIAL_CAPACITY, dtype=np.float64)
        self._counts = np.zeros(_INITIAL_CAPACITY, dtype=np.int64)
        self._transitions = np.zeros((_INITIAL_CAPACITY, _INITIAL_CAPACITY),
                                     dtype=np.int64)
        self._class_counts = (np.zeros((_INITIAL_CAPACITY, n_classes),
                                       dtype=np.int64) if is_output else None)
        self.n_coincidences = 0
        self.groups: list[list[int]] | None = None
        self.inference_matrix: np.ndarray | None = None
        self._prev_idx: int | None = None
        self.trained = False

    # -- training ---------------------------------------------------------

    @property
    def coincidences(self) -> np.ndarray:
        return self._store[: self.n_coincidences]

    @property
    def counts(self) -> np.ndarray:
        return self._counts[: self.n_coincidences]

    @property
    def transitions(self) -> np.ndarray:
        nc = self.n_coincidences
        return self._transitions[:nc, :nc]

    @property
    def n_groups(self) -> int:
        if self.is_output:
            return self.n_classes
        if self.groups is None:
            raise UntrainedNetwork("temporal groups not built yet")
        return len(self.groups)

    def spatial_pool_update(self, pattern: np.ndarray) -> int:
        """Match against the pool or admit a new coincidence.

        The best stored match above the matching threshold takes the count
        (lowest index on ties); anything less similar than the threshold is
        distinct enough to store. Zero patterns carry no direction, so they
        match only a stored zero pattern.
        """
        x = np.asarray(pattern, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise LengthMismatch(
                f"pattern has shape {x.shape}, node expects ({self.input_dim},)")
        nc = self.n_coincidences
        norm_x = np.linalg.norm(x)
        if nc > 0:
            if norm_x == 0.0:
                zero_rows = np.flatnonzero(self._norms[:nc] == 0.0)
                if zero_rows.size:
                    best = int(zero_rows[0])
                    self._counts[best] += 1
                    return best
            else:
                sims = self._store[:nc] @ x
                nz = self._norms[:nc] > 0
                sims[nz] /= self._norms[:nc][nz] * norm_x
                sims[~nz] = 0.0
                best = int(np.argmax(sims))
                if sims[best] >= self.matching_threshold:
                    self._counts[best] += 1
                    return best
        return self._append(x, norm_x)

    def _append(self, x: np.ndarray, norm_x: float) -> int:
        idx = self.n_coincidences
        if idx == self._store.shape[0]:
            self._grow()
        self._store[idx] = x
        self._norms[idx] = norm_x
        self._counts[idx] = 1
        self.n_coincidences += 1
        return idx

    def _grow(self):
        cap = self._store.shape[0] * 2
        self._store = np.vstack([self._store, np.zeros_like(self._store)])
        self._norms = np.concatenate([self._norms, np.zeros_like(self._norms)])
        self._counts = np.concatenate([self._counts, np.zeros_like(self._counts)])
        grown = np.zeros((cap, cap), dtype=np.int64)
        old = self._transitions.shape[0]
        grown[:old, :old] = self._transitions
        self._transitions = grown
        if self._class_counts is not None:
            self._class_counts = np.vstack(
                [self._class_counts, np.zeros_like(self._class_counts)])

    def tac_update(self, prev_idx: int, curr_idx: int):
        """Count one observed temporal transition between coincidences."""
        nc = self.n_coincidences
        if not (0 <= prev_idx < nc and 0 <= curr_idx < nc):
            raise IndexOutOfRange(
                f"transition ({prev_idx}, {curr_idx}) outside pool of {nc}")
        self._transitions[prev_idx, curr_idx] += 1

    def begin_sequence(self):
        """Transitions never cross a sequence boundary."""
        self._prev_idx = None

    def observe(self, pattern: np.ndarray, class_idx: int | None = None) -> int:
        """Pool one frame and record its transition from the previous frame."""
        idx = self.spatial_pool_update(pattern)
        if self._prev_idx is not None and not self.is_output:
            self.tac_update(self._prev_idx, idx)
        self._prev_idx = idx
        if self.is_output:
            if class_idx is None:
                raise ValueError("output node training needs a class label")
            self.update_pcw(idx, class_idx)
        return idx

    def temporal_pool(self) -> list[list[int]]:
        """Greedy grouping of coincidences by transition affinity.

        Seed with the unassigned (i, j) maximizing P(c_i) * transitions[i, j],
        then repeatedly chain to the strongest positive unassigned transition
        from the last-added element until the group is full or no positive
        link remains. Leftover coincidences become singletons. Ties pick the
        lowest index.
        """
        nc = self.n_coincidences
        if nc == 0:
            raise EmptyPool("cannot group an empty spatial pool")
        total = self._counts[:nc].sum()
        prob = self._counts[:nc] / total
        trans = self._transitions[:nc, :nc]
        unassigned = np.ones(nc, dtype=bool)
        groups: list[list[int]] = []
        while unassigned.any():
            ua = np.flatnonzero(unassigned)
            seed_scores = prob[ua, None] * trans[np.ix_(ua, ua)]
            flat = int(np.argmax(seed_scores))
            if seed_scores.flat[flat] <= 0:
                break
            i = int(ua[flat // ua.size])
            group = [i]
            unassigned[i] = False
            last = i
            while len(group) < self.max_group_size:
                cand = np.flatnonzero(unassigned)
                if cand.size == 0:
                    break
                row = trans[last, cand]
                if row.max() <= 0:
                    break
                nxt = int(cand[int(np.argmax(row))])
                group.append(nxt)
                unassigned[nxt] = False
                last = nxt
            groups.append(group)
        for i in np.flatnonzero(unassigned):
            groups.append([int(i)])
        self.groups = groups
        return groups

    def build_pcg(self) -> np.ndarray:
        """Coincidence-to-group inference matrix.

        Entry (i, j) is the occurrence probability of coincidence i when i
        belongs to group j, zero otherwise; columns are then normalized to
        unit sum and snapped to the weight grid.
        """
        if self.is_output:
            raise NotOutputNode("output node uses class evidence instead")
        nc = self.n_coincidences
        if nc == 0:
            raise EmptyPool("cannot build an inference matrix without patterns")
        if self.groups is None:
            self.temporal_pool()
        prob = self._counts[:nc] / self._counts[:nc].sum()
        matrix = np.zeros((nc, len(self.groups)), dtype=np.float64)
        for j, group in enumerate(self.groups):
            members = np.array(group, dtype=int)
            matrix[members, j] = prob[members]
        matrix = _normalize_columns(matrix)
        self.inference_matrix = quantize_matrix(matrix, self.weight_bits)
        return self.inference_matrix

    def update_pcw(self, coincidence_idx: int, class_idx: int):
        """Supervised evidence count for the output node."""
        if not self.is_output:
            raise NotOutputNode("only the output node accumulates class counts")
        if not 0 <= coincidence_idx < self.n_coincidences:
            raise IndexOutOfRange(f"no coincidence {coincidence_idx}")
        if not 0 <= class_idx < self.n_classes:
            raise IndexOutOfRange(f"no class {class_idx}")
        self._class_counts[coincidence_idx, class_idx] += 1

    @property
    def class_counts(self) -> np.ndarray:
        if not self.is_output:
            raise NotOutputNode("only the output node has class counts")
        return self._class_counts[: self.n_coincidences]

    def finalize(self):
        """Freeze training: build groups and the quantized inference matrix."""
        if self.n_coincidences == 0:
            raise EmptyPool("node saw no training input")
        if self.is_output:
            matrix = _normalize_columns(self.class_counts.astype(np.float64))
            self.inference_matrix = quantize_matrix(matrix, self.weight_bits)
            self.groups = None
        else:
            if self.groups is None:
                self.temporal_pool()
            self.build_pcg()
        self.trained = True

    # -- inference --------------------------------------------------------

    def compute_spatial_density(self, pattern: np.ndarray, backend,
                                key=None) -> np.ndarray:
        """Density over stored coincidences: per-pattern dot products."""
        if not self.trained:
            raise UntrainedNetwork("node is not finalized")
        x = np.asarray(pattern, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise LengthMismatch(
                f"input has shape {x.shape}, node expects ({self.input_dim},)")
        y = backend.dot_product_bank(x, self.coincidences,
                                     key=_stage_key(key, "patterns"),
                                     code_max=backend.input_code_max(self))
        y = np.where(y < backend.y_threshold, 0, y)
        if self.is_output:
            # hard winner among coincidences before the class mapping; no
            # evidence at all propagates as silence rather than pattern 0
            if y.max() > 0:
                onehot = np.zeros_like(y)
                onehot[int(np.argmax(y))] = backend.one_hot_level(self)
                y = onehot
            else:
                y = np.zeros_like(y)
        return y

    def compute_group_density(self, y: np.ndarray, backend, key=None
                              ) -> np.ndarray:
        """Marginalize the pattern density over groups (or classes)."""
        if self.inference_matrix is None:
            raise UntrainedNetwork("inference matrix not built")
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.n_coincidences,):
            raise LengthMismatch(
                f"density has shape {y.shape}, pool holds {self.n_coincidences}")
        return backend.dot_product_bank(y, self.inference_matrix.T,
                                        key=_stage_key(key, "groups"),
                                        code_max=backend.density_code_max(self))

    def infer(self, pattern: np.ndarray, backend, key=None,
              dom_threshold: float = 0.0) -> NodeOutput:
        """Full chain: pattern density, group density, winner selection."""
        y = self.compute_spatial_density(pattern, backend, key=key)
        density = self.compute_group_density(y, backend, key=key)
        selection = backend.select_winner(density, dom_threshold=dom_threshold)
        has_evidence = bool(np.max(density) > 0) if density.size else False
        return NodeOutput(y=y, group_density=density, winner=selection.winner,
                          dom=selection.dom, has_evidence=has_evidence,
                          rejected=selection.rejected)


def compose_spatial_input(child_ngroups: list[int],
                          child_outputs: list[NodeOutput]) -> np.ndarray:
    """Juxtapose child messages as concatenated one-hot winner encodings.

    A child that produced no evidence contributes a zero block so silence
    propagates instead of masquerading as group 0.
    """
    from .errors import ArityMismatch

    if len(child_ngroups) != len(child_outputs):
        raise ArityMismatch(
            f"{len(child_ngroups)} children wired, {len(child_outputs)} outputs")
    blocks = []
    for ng, out in zip(child_ngroups, child_outputs):
        block = np.zeros(ng, dtype=np.float64)
        if out.has_evidence:
            if not 0 <= out.winner < ng:
                raise IndexOutOfRange(
                    f"winner {out.winner} outside {ng} groups")
            block[out.winner] = 1.0
        blocks.append(block)
    return np.concatenate(blocks)


def infer_node(node: HtmNode, pattern: np.ndarray, backend, key=None
               ) -> NodeOutput:
    return node.infer(pattern, backend, key=key)


def _normalize_columns(matrix: np.ndarray) -> np.ndarray:
    sums = matrix.sum(axis=0)
    out = matrix.copy()
    nz = sums > 0
    out[:, nz] /= sums[nz]
    return out


def _stage_key(key, stage: str):
    return None if key is None else (*key, stage)
