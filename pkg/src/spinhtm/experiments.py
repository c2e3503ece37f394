"""Experiment runners shared by the CLI and the verification suite.

Everything here is deterministic given (config, seed). Sweeps reuse one
seed across points so paired comparisons see identical data.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .backends import IdealBackend
from .config import ExperimentConfig
from .crossbar import (DtcsConfig, column_currents, detection_margin,
                       inject_variation, map_weights_to_conductances)
from .data import build_training_sequences, load_corpus, prepare_image, \
    select_per_class
from .energy import NodeActivity, node_energy_report, threshold_sweep
from .errors import UnknownAxis
from .images import Image
from .network import HtmNetwork
from .topology import NetworkTopology


@dataclass
class PreparedDataset:
    train_images: list[Image]
    train_labels: list[int]
    test_images: list[Image]
    test_labels: list[int]
    source: str


def load_prepared_dataset(cfg: ExperimentConfig) -> PreparedDataset:
    ds = cfg["dataset"]
    corpus = load_corpus(dataset_dir=ds["dir"], cache_dir=ds["cache_dir"])
    net = cfg["network"]
    bits = int(ds["input_bits"])
    train_raw, train_labels = select_per_class(
        corpus.train_images, corpus.train_labels,
        per_class=int(ds["train_per_class"]), n_classes=int(ds["n_classes"]))
    test_raw, test_labels = select_per_class(
        corpus.test_images, corpus.test_labels,
        per_class=int(ds["test_per_class"]), n_classes=int(ds["n_classes"]))
    prep = lambda img: prepare_image(img, height=int(net["height"]),
                                     width=int(net["width"]), bits=bits)
    return PreparedDataset(
        train_images=[prep(i) for i in train_raw],
        train_labels=train_labels,
        test_images=[prep(i) for i in test_raw],
        test_labels=test_labels,
        source=corpus.source)


def train_from_config(cfg: ExperimentConfig,
                      dataset: PreparedDataset | None = None
                      ) -> tuple[HtmNetwork, dict]:
    if dataset is None:
        dataset = load_prepared_dataset(cfg)
    sequences = build_training_sequences(
        dataset.train_images, dataset.train_labels, cfg.scan_params(),
        height=int(cfg["network"]["height"]),
        width=int(cfg["network"]["width"]),
        bits=int(cfg["dataset"]["input_bits"]))
    topo = NetworkTopology.build(height=int(cfg["network"]["height"]),
                                 width=int(cfg["network"]["width"]),
                                 patch=int(cfg["network"]["patch"]))
    start = time.perf_counter()
    net = HtmNetwork(topo, **cfg.network_kwargs()).train(sequences)
    elapsed = time.perf_counter() - start
    report = {
        "schema_version": 1,
        "dataset_source": dataset.source,
        "n_sequences": len(sequences),
        "frames_per_sequence": len(sequences[0]) if sequences else 0,
        "train_seconds": elapsed,
        "node_stats": net.node_stats(),
    }
    return net, report


def evaluate_ideal(net: HtmNetwork, images: list[Image], labels: list[int]
                   ) -> dict:
    """Batch exact-arithmetic evaluation with confusion counts."""
    if not images:
        return {"schema_version": 1, "n_images": 0, "accuracy": None,
                "rejects": 0, "per_class_accuracy": {},
                "confusion": []}
    predicted, doms, rejected = net.classify_batch(images)
    return _score(np.asarray(labels), predicted, rejected, net.n_classes)


def evaluate_backend(net: HtmNetwork, images: list[Image], labels: list[int],
                     backend, workers: int = 1) -> dict:
    """Per-image evaluation through an arbitrary backend."""
    if not images:
        return {"schema_version": 1, "n_images": 0, "accuracy": None,
                "rejects": 0, "per_class_accuracy": {}, "confusion": []}

    def run(img):
        return net.infer(img, backend)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, images))
    else:
        results = [run(img) for img in images]
    predicted = np.array([r.label if r.label is not None else -1
                          for r in results])
    rejected = np.array([r.rejected for r in results])
    return _score(np.asarray(labels), predicted, rejected, net.n_classes)


def _score(labels: np.ndarray, predicted: np.ndarray, rejected: np.ndarray,
           n_classes: int) -> dict:
    ok = (~rejected) & (predicted == labels)
    confusion = np.zeros((n_classes, n_classes), dtype=int)
    for truth, pred, rej in zip(labels, predicted, rejected):
        if not rej and 0 <= pred < n_classes:
            confusion[truth, pred] += 1
    per_class = {}
    for c in range(n_classes):
        mask = labels == c
        if mask.any():
            per_class[str(c)] = float(ok[mask].mean())
    return {
        "schema_version": 1,
        "n_images": int(labels.size),
        "accuracy": float(ok.mean()),
        "rejects": int(rejected.sum()),
        "per_class_accuracy": per_class,
        "confusion": confusion.tolist(),
    }


def ideal_margin_profiles(net: HtmNetwork, images: list[Image]) -> np.ndarray:
    """Per-image minimum relative winner margin across every node selection.

    The margin of a selection is (best - second) / best over the values the
    winner was chosen from; single-candidate selections are unambiguous and
    contribute 1. Images where some node carries no evidence score 0.
    """
    frames = np.stack([img.pixels for img in images]).astype(np.float64)
    n = frames.shape[0]
    mins = np.full(n, np.inf)

    inputs = [p for p in net.topology.extract_patches(frames)]
    for level in range(1, net.topology.n_levels + 1):
        nodes = net.levels[level - 1]
        winners, evidence = [], []
        for node, x in zip(nodes, inputs):
            y = x @ node.coincidences.T
            if node.is_output:
                mins = np.minimum(mins, _relative_margins(y))
                best = np.argmax(y, axis=1)
                dens = node.inference_matrix[best]
                dens = np.where((y.max(axis=1) > 0)[:, None], dens, 0.0)
            else:
                dens = y @ node.inference_matrix
            mins = np.minimum(mins, _relative_margins(dens))
            winners.append(np.argmax(dens, axis=1))
            evidence.append(dens.max(axis=1) > 0)
        if level < net.topology.n_levels:
            inputs = net._scatter_child_messages(level + 1, nodes, winners,
                                                 evidence, n)
    return np.where(np.isfinite(mins), mins, 0.0)


def _relative_margins(values: np.ndarray) -> np.ndarray:
    if values.shape[1] < 2:
        return np.ones(values.shape[0])
    top2 = np.partition(values, -2, axis=1)[:, -2:]
    best = top2[:, 1]
    second = top2[:, 0]
    out = np.zeros(values.shape[0])
    nz = best > 0
    out[nz] = (best[nz] - second[nz]) / best[nz]
    return out


def compare_backends(net: HtmNetwork, images: list[Image], labels: list[int],
                     cfg: ExperimentConfig, seed: int | None = None
                     ) -> tuple[list[dict], dict]:
    """Ideal vs configured hardware backend, image by image."""
    ideal = IdealBackend(y_threshold=float(cfg["network"]["y_threshold"]))
    hardware = cfg.build_backend(seed=seed)
    margins = ideal_margin_profiles(net, images)
    rows = []
    agree = 0
    for i, (img, truth) in enumerate(zip(images, labels)):
        a = net.infer(img, ideal)
        b = net.infer(img, hardware)
        same = (a.label == b.label) and (a.rejected == b.rejected)
        agree += int(same)
        rows.append({
            "image": i,
            "true_label": int(truth),
            "ideal_label": -1 if a.label is None else int(a.label),
            "hardware_label": -1 if b.label is None else int(b.label),
            "agree": int(same),
            "ideal_dom": float(a.dom),
            "hardware_dom": float(b.dom),
            "min_margin": float(margins[i]),
        })
    summary = {
        "schema_version": 1,
        "n_images": len(images),
        "agreement": agree / len(images) if images else None,
        "backend": cfg["backend"]["kind"],
        "resolution": int(cfg["backend"]["resolution"]),
    }
    return rows, summary


def margin_sweep(cfg: ExperimentConfig, scales, rows: int = 32,
                 cols: int = 8, seed: int | None = None) -> list[dict]:
    """Detection margin vs conductance operating range, ideal and nodal.

    A fixed random stored-pattern set and input drive are evaluated at each
    range scale; only the conductance window moves.
    """
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    drive = cfg.drive_config()
    base = cfg.array_config()
    weights = rng.uniform(0.0, 1.0, size=(rows, cols))
    # give column 0 a deliberate best-match structure so margins are stable
    codes = rng.integers(1, (1 << drive.input_bits), size=rows).astype(float)
    weights[:, 0] = codes / codes.max()
    out = []
    for scale in scales:
        arr = map_weights_to_conductances(weights, base.scaled(scale))
        ideal = column_currents(arr, codes, drive, mode="ideal")
        nodal = column_currents(arr, codes, drive, mode="nodal")
        out.append({
            "g_scale": float(scale),
            "g_min_s": arr.config.g_min,
            "g_max_s": arr.config.g_max,
            "margin_ideal": detection_margin(ideal),
            "margin_nodal": detection_margin(nodal),
        })
    return out


def variation_trial(net: HtmNetwork, images, labels, cfg: ExperimentConfig,
                    sigma: float, seed: int, workers: int = 1) -> float:
    backend = cfg.build_backend(seed=seed, variation_sigma=sigma)
    report = evaluate_backend(net, images, labels, backend, workers=workers)
    return report["accuracy"]


def sweep(cfg: ExperimentConfig, axis: str, values, workers: int = 1
          ) -> list[dict]:
    """One row of metrics per axis value, same seed across points."""
    if axis == "matching_threshold":
        dataset = load_prepared_dataset(cfg)
        rows = []
        for value in values:
            point = ExperimentConfig(raw=_with_override(
                cfg, "network", "matching_threshold", float(value)))
            point.validate()
            net, report = train_from_config(point, dataset=dataset)
            result = evaluate_ideal(net, dataset.test_images,
                                    dataset.test_labels)
            stats = report["node_stats"]
            rows.append({
                "matching_threshold": float(value),
                "accuracy": result["accuracy"],
                "mean_nc_level1": _mean(stats[0], "n_coincidences"),
                "mean_ng_level1": _mean(stats[0], "n_groups"),
                "mean_nc_top": _mean(stats[-1], "n_coincidences"),
                "train_seconds": report["train_seconds"],
            })
        return rows
    if axis == "variation_sigma":
        dataset = load_prepared_dataset(cfg)
        net, _ = train_from_config(cfg, dataset=dataset)
        rows = []
        for value in values:
            acc = variation_trial(net, dataset.test_images,
                                  dataset.test_labels, cfg,
                                  sigma=float(value), seed=cfg.seed,
                                  workers=workers)
            rows.append({"variation_sigma": float(value), "accuracy": acc})
        return rows
    if axis == "i_threshold":
        activity = NodeActivity(n_inputs_stage1=256, n_columns_stage1=270,
                                n_columns_stage2=64,
                                resolution=int(cfg["backend"]["resolution"]))
        return threshold_sweep(activity, cfg.energy_params(),
                               [float(v) for v in values])
    if axis == "g_range":
        return margin_sweep(cfg, [float(v) for v in values])
    raise UnknownAxis(f"no sweep axis {axis!r}; have matching_threshold, "
                      "variation_sigma, i_threshold, g_range")


def _with_override(cfg: ExperimentConfig, section: str, key: str, value):
    import copy

    doc = copy.deepcopy(cfg.raw)
    doc[section][key] = value
    return doc


def _mean(stats: list[dict], field: str) -> float:
    return float(np.mean([s[field] for s in stats]))


def activity_from_network(net: HtmNetwork, level: int, node_idx: int,
                          resolution: int) -> NodeActivity:
    node = net.levels[level - 1][node_idx]
    return NodeActivity(n_inputs_stage1=node.input_dim,
                        n_columns_stage1=node.n_coincidences,
                        n_columns_stage2=node.n_groups,
                        resolution=resolution)
