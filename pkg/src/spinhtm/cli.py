"""Command-line harness: train, infer, sweep, compare-backends, energy-report.

All results land as JSON/CSV under --out. Exit codes: 0 success, 2 config
problem, 3 I/O problem, 4 domain error; failures print a one-line JSON
object with the error category to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .config import ExperimentConfig
from .energy import NodeActivity, node_energy_report, threshold_sweep
from .errors import ConfigError, SpinHtmError
from .experiments import (activity_from_network, compare_backends,
                          evaluate_backend, evaluate_ideal,
                          load_prepared_dataset, sweep, train_from_config)
from .network import HtmNetwork, canonical_json


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _fail(exc)
        return 2
    except OSError as exc:
        _fail(exc, category="io")
        return 3
    except SpinHtmError as exc:
        _fail(exc)
        return 4
    except Exception as exc:  # noqa: BLE001 - last-resort CLI boundary
        _fail(exc, category="internal")
        return 1


def _fail(exc: Exception, category: str | None = None):
    payload = {
        "error": str(exc),
        "category": category or getattr(exc, "category", "error"),
        "type": type(exc).__name__,
    }
    print(json.dumps(payload), file=sys.stderr)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinhtm",
        description="Hierarchical temporal memory simulator with crossbar "
                    "and spin-neuron hardware backends")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="YAML config file (defaults built in)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", type=Path, default=Path("results"),
                       help="output directory")

    p_train = sub.add_parser("train", help="train a network and save it")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_infer = sub.add_parser("infer", help="classify the test set")
    common(p_infer)
    p_infer.add_argument("--network", type=Path, required=True)
    p_infer.set_defaults(func=cmd_infer)

    p_sweep = sub.add_parser("sweep", help="sweep one axis, CSV out")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated axis values")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_cmp = sub.add_parser("compare-backends",
                           help="ideal vs hardware agreement table")
    common(p_cmp)
    p_cmp.add_argument("--network", type=Path, required=True)
    p_cmp.set_defaults(func=cmd_compare_backends)

    p_energy = sub.add_parser("energy-report",
                              help="per-node energy breakdown")
    common(p_energy)
    p_energy.add_argument("--network", type=Path, default=None,
                          help="take node dimensions from a trained network")
    p_energy.add_argument("--level", type=int, default=2)
    p_energy.add_argument("--node", type=int, default=0)
    p_energy.add_argument("--sweep", dest="sweep_axis", default=None,
                          choices=["i_threshold"])
    p_energy.add_argument("--values", default=None,
                          help="comma-separated thresholds for --sweep")
    p_energy.set_defaults(func=cmd_energy_report)
    return parser


def _load_config(args) -> ExperimentConfig:
    overrides = {"seed": args.seed} if args.seed is not None else None
    return ExperimentConfig.load(path=args.config, overrides=overrides)


def _outdir(args) -> Path:
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def _write_json(path: Path, doc: dict):
    path.write_bytes(canonical_json(doc) + b"\n")


def _write_csv(path: Path, rows: list[dict]):
    if not rows:
        path.write_text("")
        return
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    net, report = train_from_config(cfg)
    net_path = out / "network.json.gz"
    net.save(net_path)
    report["network_file"] = net_path.name
    report["config"] = cfg.to_dict()
    _write_json(out / "train_report.json", report)
    print(f"trained network -> {net_path}")
    return 0


def cmd_infer(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    net = HtmNetwork.load(args.network)
    dataset = load_prepared_dataset(cfg)
    if cfg["backend"]["kind"] == "ideal":
        report = evaluate_ideal(net, dataset.test_images, dataset.test_labels)
    else:
        backend = cfg.build_backend()
        report = evaluate_backend(net, dataset.test_images,
                                  dataset.test_labels, backend)
    report["dataset_source"] = dataset.source
    report["backend"] = cfg["backend"]["kind"]
    _write_json(out / "infer_report.json", report)
    confusion_rows = [
        {"true_class": i,
         **{f"pred_{j}": v for j, v in enumerate(row)}}
        for i, row in enumerate(report["confusion"])
    ]
    _write_csv(out / "confusion.csv", confusion_rows)
    acc = report["accuracy"]
    print(f"accuracy {acc if acc is None else round(acc, 4)} "
          f"({report['rejects']} rejects) -> {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    values = [v for v in args.values.split(",") if v != ""]
    rows = sweep(cfg, args.axis, values, workers=args.workers)
    path = out / f"sweep_{args.axis}.csv"
    _write_csv(path, rows)
    print(f"{len(rows)} sweep points -> {path}")
    return 0


def cmd_compare_backends(args) -> int:
    cfg = _load_config(args)
    if cfg["backend"]["kind"] == "ideal":
        raise ConfigError("compare-backends needs a hardware backend.kind")
    out = _outdir(args)
    net = HtmNetwork.load(args.network)
    dataset = load_prepared_dataset(cfg)
    rows, summary = compare_backends(net, dataset.test_images,
                                     dataset.test_labels, cfg)
    _write_csv(out / "backend_agreement.csv", rows)
    _write_json(out / "backend_agreement.json", summary)
    print(f"agreement {summary['agreement']:.4f} over "
          f"{summary['n_images']} images -> {out}")
    return 0


def cmd_energy_report(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    resolution = int(cfg["backend"]["resolution"])
    if args.network is not None:
        net = HtmNetwork.load(args.network)
        activity = activity_from_network(net, level=args.level,
                                         node_idx=args.node,
                                         resolution=resolution)
    else:
        # representative mid-level node dimensions
        activity = NodeActivity(n_inputs_stage1=256, n_columns_stage1=270,
                                n_columns_stage2=64, resolution=resolution)
    params = cfg.energy_params()
    breakdown = node_energy_report(activity, params)
    doc = {"schema_version": 1,
           "activity": {
               "n_inputs_stage1": activity.n_inputs_stage1,
               "n_columns_stage1": activity.n_columns_stage1,
               "n_columns_stage2": activity.n_columns_stage2,
               "resolution": activity.resolution,
           },
           **breakdown.as_dict()}
    _write_json(out / "energy_report.json", doc)
    if args.sweep_axis == "i_threshold":
        if not args.values:
            raise ConfigError("--sweep i_threshold needs --values")
        thresholds = [float(v) for v in args.values.split(",")]
        rows = threshold_sweep(activity, params, thresholds)
        _write_csv(out / "energy_sweep_i_threshold.csv", rows)
    total_pj = breakdown.total * 1e12
    print(f"node energy {total_pj:.2f} pJ, CMOS ratio "
          f"{breakdown.ratio:.0f}x -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
