"""The node hierarchy: bottom-up training, inference, and serialization.

Training proceeds level by level; parents train only after every child is
finalized. While training level L, sequences replay through the trained
levels below in exact-arithmetic inference mode, and each level-L node
pools the composed child messages frame by frame. The output node is
supervised: it accumulates class evidence instead of temporal groups.

Trained networks are immutable; `infer` may run against any backend.
"""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backends import ComputeBackend, IdealBackend
from .errors import (EmptyPool, TopologyMismatch, UntrainedChild,
                     UntrainedNetwork)
from .images import Image
from .node import HtmNode, NodeOutput, compose_spatial_input
from .scan import TrainingSequence
from .topology import NetworkTopology

FORMAT_NAME = "spinhtm-network"
FORMAT_VERSION = 1


@dataclass
class InferenceResult:
    label: int | None
    dom: float
    rejected: bool


class HtmNetwork:
    def __init__(self, topology: NetworkTopology, n_classes: int = 10,
                 matching_threshold: float = 0.7, max_group_size: int = 10,
                 weight_bits: int = 5, y_threshold: float = 0.0,
                 dom_threshold: float = 0.0):
        self.topology = topology
        self.n_classes = n_classes
        self.matching_threshold = matching_threshold
        self.max_group_size = max_group_size
        self.weight_bits = weight_bits
        self.y_threshold = y_threshold
        self.dom_threshold = dom_threshold
        self.levels: list[list[HtmNode]] = []
        self.trained = False

    # -- training ----------------------------------------------------------

    def train(self, sequences: list[TrainingSequence]) -> "HtmNetwork":
        if not sequences:
            raise ValueError("no training sequences supplied")
        if any(seq.label is None for seq in sequences):
            raise ValueError("output-node training is supervised: label "
                             "every training sequence")
        self.levels = []
        frames_per_seq = [_sequence_frames(self.topology, seq)
                          for seq in sequences]
        for level in range(1, self.topology.n_levels + 1):
            self._train_level(level, sequences, frames_per_seq)
        self.trained = True
        return self

    def _train_level(self, level, sequences, frames_per_seq):
        if len(self.levels) != level - 1:
            raise UntrainedChild(f"level {level} trained out of order")
        is_output = level == self.topology.n_levels
        nodes: list[HtmNode] | None = None
        for seq, frames in zip(sequences, frames_per_seq):
            inputs = self._compose_level_inputs(frames, level)
            if nodes is None:
                nodes = [
                    HtmNode(input_dim=inputs[i].shape[1],
                            matching_threshold=self.matching_threshold,
                            max_group_size=self.max_group_size,
                            weight_bits=self.weight_bits,
                            is_output=is_output,
                            n_classes=self.n_classes if is_output else 0,
                            input_kind="pixels" if level == 1 else "children")
                    for i in range(len(inputs))
                ]
            for node, node_inputs in zip(nodes, inputs):
                node.begin_sequence()
                for frame_vec in node_inputs:
                    node.observe(frame_vec,
                                 class_idx=seq.label if is_output else None)
        for node in nodes:
            node.finalize()
        self.levels.append(nodes)

    # -- exact-arithmetic batched replay ------------------------------------

    def _compose_level_inputs(self, frames: np.ndarray, level: int
                              ) -> list[np.ndarray]:
        """Input matrix (n_frames, dim) per node of `level`, replaying all
        trained levels below it with exact arithmetic."""
        inputs = [p for p in self.topology.extract_patches(frames)]
        for lower in range(1, level):
            nodes = self.levels[lower - 1]
            if not all(n.trained for n in nodes):
                raise UntrainedChild(f"level {lower} is not finalized")
            winners = []
            evidence = []
            for node, x in zip(nodes, inputs):
                dens = self._node_density_batch(node, x)
                winners.append(np.argmax(dens, axis=1))
                evidence.append(dens.max(axis=1) > 0)
            inputs = self._scatter_child_messages(lower + 1, nodes, winners,
                                                  evidence, frames.shape[0])
        return inputs

    def _node_density_batch(self, node: HtmNode, x: np.ndarray) -> np.ndarray:
        y = x @ node.coincidences.T
        if self.y_threshold > 0:
            y = np.where(y < self.y_threshold, 0.0, y)
        if node.is_output:
            best = np.argmax(y, axis=1)
            dens = node.inference_matrix[best]
            dens = np.where((y.max(axis=1) > 0)[:, None], dens, 0.0)
            return dens
        return y @ node.inference_matrix

    def _scatter_child_messages(self, level, child_nodes, winners, evidence,
                                n_frames) -> list[np.ndarray]:
        composed = []
        for child_ids in self.topology.level_children(level):
            dim = sum(child_nodes[c].n_groups for c in child_ids)
            x = np.zeros((n_frames, dim), dtype=np.float64)
            offset = 0
            for c in child_ids:
                ng = child_nodes[c].n_groups
                mask = evidence[c]
                x[np.flatnonzero(mask), offset + winners[c][mask]] = 1.0
                offset += ng
            composed.append(x)
        return composed

    # -- inference -----------------------------------------------------------

    def infer(self, image: Image, backend: ComputeBackend | None = None
              ) -> InferenceResult:
        """Bottom-up pass over one image; rejects when the final degree of
        match falls below the network's threshold."""
        self._require_trained()
        backend = backend if backend is not None else IdealBackend()
        frame = _image_matrix(self.topology, image)[0]
        outputs: list[NodeOutput] = []
        for i, node in enumerate(self.levels[0]):
            r0, r1, c0, c1 = self.topology.patch_bounds(i)
            outputs.append(node.infer(frame[r0:r1, c0:c1].reshape(-1),
                                      backend, key=(1, i)))
        for level in range(2, self.topology.n_levels + 1):
            nodes = self.levels[level - 1]
            children = self.topology.level_children(level)
            is_output = level == self.topology.n_levels
            next_outputs = []
            for i, (node, child_ids) in enumerate(zip(nodes, children)):
                child_ng = [self.levels[level - 2][c].n_groups
                            for c in child_ids]
                child_out = [outputs[c] for c in child_ids]
                pattern = compose_spatial_input(child_ng, child_out)
                next_outputs.append(node.infer(
                    pattern, backend, key=(level, i),
                    dom_threshold=self.dom_threshold if is_output else 0.0))
            outputs = next_outputs
        top = outputs[0]
        return InferenceResult(label=None if top.rejected else top.winner,
                               dom=top.dom, rejected=top.rejected)

    def classify_batch(self, images: list[Image]) -> tuple[np.ndarray,
                                                           np.ndarray,
                                                           np.ndarray]:
        """Exact-arithmetic batch classification: (labels, doms, rejected)."""
        self._require_trained()
        frames = _image_matrix(self.topology, images)
        inputs = self._compose_level_inputs(frames, self.topology.n_levels)
        out_node = self.levels[-1][0]
        dens = self._node_density_batch(out_node, inputs[0])
        labels = np.argmax(dens, axis=1)
        doms = dens.max(axis=1)
        rejected = doms < self.dom_threshold
        return labels, doms, rejected

    def node_stats(self) -> list[list[dict]]:
        """Per-node pool and group sizes, by level."""
        self._require_trained()
        stats = []
        for level_nodes in self.levels:
            stats.append([
                {"n_coincidences": n.n_coincidences, "n_groups": n.n_groups}
                for n in level_nodes
            ])
        return stats

    def _require_trained(self):
        if not self.trained or not self.levels:
            raise UntrainedNetwork("train or load the network first")

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        self._require_trained()
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "topology": self.topology.as_dict(),
            "params": {
                "n_classes": self.n_classes,
                "matching_threshold": self.matching_threshold,
                "max_group_size": self.max_group_size,
                "weight_bits": self.weight_bits,
                "y_threshold": self.y_threshold,
                "dom_threshold": self.dom_threshold,
            },
            "levels": [[_node_to_dict(n) for n in level]
                       for level in self.levels],
        }

    def save(self, path) -> bytes:
        payload = canonical_json(self.to_dict())
        path = Path(path)
        if path.suffix == ".gz":
            # fixed mtime keeps the archive byte-stable across runs
            payload = gzip.compress(payload, compresslevel=6, mtime=0)
        path.write_bytes(payload)
        return payload

    @classmethod
    def load(cls, path) -> "HtmNetwork":
        raw = Path(path).read_bytes()
        if raw[:2] == b"\x1f\x8b":
            raw = gzip.decompress(raw)
        doc = json.loads(raw.decode("utf-8"))
        if doc.get("format") != FORMAT_NAME:
            raise ValueError(f"not a {FORMAT_NAME} file")
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported version {doc.get('version')}")
        topo = NetworkTopology.build(**doc["topology"])
        params = doc["params"]
        net = cls(topology=topo, **params)
        net.levels = [[_node_from_dict(d) for d in level]
                      for level in doc["levels"]]
        net.trained = True
        return net


def train_network(topology: NetworkTopology, sequences, **params) -> HtmNetwork:
    return HtmNetwork(topology, **params).train(sequences)


def infer_network(net: HtmNetwork, image: Image,
                  backend: ComputeBackend | None = None) -> InferenceResult:
    return net.infer(image, backend)


def canonical_json(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _sequence_frames(topology: NetworkTopology, seq: TrainingSequence
                     ) -> np.ndarray:
    return _image_matrix(topology, seq.frames)


def _image_matrix(topology: NetworkTopology, images) -> np.ndarray:
    if isinstance(images, Image):
        images = [images]
    frames = np.stack([img.pixels for img in images]).astype(np.float64)
    if frames.shape[1:] != (topology.height, topology.width):
        raise TopologyMismatch(
            f"images are {frames.shape[1:]}, field is "
            f"({topology.height}, {topology.width})")
    return frames


def _node_to_dict(node: HtmNode) -> dict:
    nc = node.n_coincidences
    trans = node.transitions
    nz = np.argwhere(trans > 0)
    levels = (1 << node.weight_bits) - 1
    scale = float(node.inference_matrix.max())
    if scale > 0:
        codes = np.floor(node.inference_matrix / scale * levels + 0.5).astype(int)
    else:
        codes = np.zeros_like(node.inference_matrix, dtype=int)
    doc = {
        "input_dim": node.input_dim,
        "input_kind": node.input_kind,
        "matching_threshold": node.matching_threshold,
        "max_group_size": node.max_group_size,
        "weight_bits": node.weight_bits,
        "is_output": node.is_output,
        "n_classes": node.n_classes,
        "coincidences": node.coincidences.tolist(),
        "counts": node.counts.tolist(),
        "transitions": [[int(i), int(j), int(trans[i, j])] for i, j in nz],
        "groups": node.groups,
        "inference_codes": codes.tolist(),
        "inference_scale": scale,
    }
    if node.is_output:
        doc["class_counts"] = node.class_counts.tolist()
    return doc


def _node_from_dict(doc: dict) -> HtmNode:
    node = HtmNode(input_dim=doc["input_dim"],
                   matching_threshold=doc["matching_threshold"],
                   max_group_size=doc["max_group_size"],
                   weight_bits=doc["weight_bits"],
                   is_output=doc["is_output"],
                   n_classes=doc["n_classes"] if doc["is_output"] else 0,
                   input_kind=doc["input_kind"])
    coincidences = np.asarray(doc["coincidences"], dtype=np.float64)
    nc = coincidences.shape[0] if coincidences.size else 0
    if nc == 0:
        raise EmptyPool("serialized node has no coincidences")
    capacity = max(64, 1 << (nc - 1).bit_length())
    node._store = np.zeros((capacity, node.input_dim), dtype=np.float64)
    node._store[:nc] = coincidences
    node._norms = np.zeros(capacity, dtype=np.float64)
    node._norms[:nc] = np.linalg.norm(coincidences, axis=1)
    node._counts = np.zeros(capacity, dtype=np.int64)
    node._counts[:nc] = doc["counts"]
    node._transitions = np.zeros((capacity, capacity), dtype=np.int64)
    for i, j, v in doc["transitions"]:
        node._transitions[i, j] = v
    node.n_coincidences = nc
    node.groups = doc["groups"]
    levels = (1 << node.weight_bits) - 1
    node.inference_matrix = (np.asarray(doc["inference_codes"],
                                        dtype=np.float64)
                             * (doc["inference_scale"] / levels))
    if node.is_output:
        node._class_counts = np.zeros((capacity, node.n_classes),
                                      dtype=np.int64)
        node._class_counts[:nc] = doc["class_counts"]
    node.trained = True
    return node
