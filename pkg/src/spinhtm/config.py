"""Experiment configuration: YAML file, env-var overrides, typed access.

Every hardware constant lives in the `hardware` section with the design's
default operating point; `SPINHTM_<SECTION>__<KEY>=value` environment
variables override individual entries (values parsed as YAML), which is how
CI pins seeds and paths without editing files.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from .backends import HardwareBackend, IdealBackend
from .crossbar import ArrayConfig, DtcsConfig
from .energy import EnergyParams
from .errors import ConfigError
from .scan import ScanParams

ENV_PREFIX = "SPINHTM_"

BACKEND_KINDS = ("ideal", "rcn-ideal", "rcn-lumped", "rcn-nodal")

DEFAULTS: dict = {
    "seed": 0,
    "dataset": {
        "dir": None,            # IDX directory; None -> bundled digits corpus
        "cache_dir": None,
        "train_per_class": 20,
        "test_per_class": 20,
        "n_classes": 10,
        "input_bits": 1,        # binary digit rasters
    },
    "network": {
        "height": 16,
        "width": 16,
        "patch": 4,
        "matching_threshold": 0.7,
        "max_group_size": 10,
        "weight_bits": 5,
        "y_threshold": 0.0,
        "dom_threshold": 0.0,
    },
    "scan": {
        "max_shift": 2,
        "shift_step": 1,
        "rotation_range": 10.0,
        "rotation_step": 5.0,
        "scale_levels": [0.9, 1.0, 1.1],
    },
    "backend": {
        "kind": "ideal",
        "resolution": 5,
        "comparator_threshold": 0.0,
        "adc_dac": "linear",
        "variation_sigma": 0.0,
    },
    "hardware": {
        "r_min_ohm": 1.0e3,
        "r_max_ohm": 32.0e3,
        "wire_r_per_um": 1.0,
        "wire_cap_per_um_f": 0.4e-15,
        "cell_pitch_um": 2.0,
        "access_r_ohm": 0.0,
        "delta_v": 50.0e-3,
        "v_clamp": 0.8,
        "gt_full": 1.0e-3,
        "i_threshold": 2.0e-6,
        "t_switch": 1.0e-9,
        "read_current": 0.3e-6,
        "read_voltage": 0.8,
        "data_rate": 100.0e6,
        "input_bits": 5,
    },
}


@dataclass
class ExperimentConfig:
    raw: dict

    @classmethod
    def load(cls, path=None, overrides: dict | None = None,
             use_env: bool = True) -> "ExperimentConfig":
        doc = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            try:
                user = yaml.safe_load(text) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"bad YAML in {path}: {exc}") from exc
            _merge(doc, user, source=str(path))
        if use_env:
            _merge(doc, _env_overrides(), source="environment")
        if overrides:
            _merge(doc, overrides, source="overrides")
        cfg = cls(raw=doc)
        cfg.validate()
        return cfg

    @classmethod
    def default(cls) -> "ExperimentConfig":
        return cls.load(use_env=False)

    def validate(self):
        kind = self["backend"]["kind"]
        if kind not in BACKEND_KINDS:
            raise ConfigError(f"backend.kind must be one of {BACKEND_KINDS}, "
                              f"got {kind!r}")
        hw = self["hardware"]
        if hw["r_min_ohm"] <= 0 or hw["r_max_ohm"] <= hw["r_min_ohm"]:
            raise ConfigError("need 0 < r_min_ohm < r_max_ohm")
        net = self["network"]
        if not 0.0 <= net["matching_threshold"] <= 1.0:
            raise ConfigError("network.matching_threshold must be in [0, 1]")
        ds = self["dataset"]
        if not 1 <= ds["input_bits"] <= 8:
            raise ConfigError("dataset.input_bits must be in [1, 8]")

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def scan_params(self) -> ScanParams:
        s = self["scan"]
        return ScanParams(max_shift=int(s["max_shift"]),
                          shift_step=int(s["shift_step"]),
                          rotation_range=float(s["rotation_range"]),
                          rotation_step=float(s["rotation_step"]),
                          scale_levels=tuple(float(v)
                                             for v in s["scale_levels"]))

    def array_config(self) -> ArrayConfig:
        hw = self["hardware"]
        return ArrayConfig(g_min=1.0 / float(hw["r_max_ohm"]),
                           g_max=1.0 / float(hw["r_min_ohm"]),
                           weight_bits=int(self["network"]["weight_bits"]),
                           wire_r_per_um=float(hw["wire_r_per_um"]),
                           cell_pitch_um=float(hw["cell_pitch_um"]),
                           access_r=float(hw["access_r_ohm"]))

    def drive_config(self) -> DtcsConfig:
        hw = self["hardware"]
        return DtcsConfig(delta_v=float(hw["delta_v"]),
                          gt_full=float(hw["gt_full"]),
                          input_bits=int(hw["input_bits"]))

    def energy_params(self) -> EnergyParams:
        hw = self["hardware"]
        return EnergyParams(delta_v=float(hw["delta_v"]),
                            v_clamp=float(hw["v_clamp"]),
                            i_threshold=float(hw["i_threshold"]),
                            t_switch=float(hw["t_switch"]),
                            read_current=float(hw["read_current"]),
                            read_voltage=float(hw["read_voltage"]),
                            data_rate=float(hw["data_rate"]),
                            wire_cap_per_um=float(hw["wire_cap_per_um_f"]),
                            cell_pitch_um=float(hw["cell_pitch_um"]))

    def build_backend(self, seed: int | None = None,
                      variation_sigma: float | None = None):
        b = self["backend"]
        if b["kind"] == "ideal":
            return IdealBackend(y_threshold=float(
                self["network"]["y_threshold"]))
        mode = b["kind"].removeprefix("rcn-")
        sigma = (float(b["variation_sigma"]) if variation_sigma is None
                 else float(variation_sigma))
        pixel_code_max = (1 << int(self["dataset"]["input_bits"])) - 1
        return HardwareBackend(array_config=self.array_config(),
                               drive=self.drive_config(),
                               resolution=int(b["resolution"]),
                               pixel_code_max=pixel_code_max,
                               mode=mode,
                               comparator_threshold=float(
                                   b["comparator_threshold"]),
                               adc_dac=str(b["adc_dac"]),
                               variation_sigma=sigma,
                               seed=self.seed if seed is None else int(seed),
                               y_threshold=int(self["network"]["y_threshold"]))

    def network_kwargs(self) -> dict:
        net = self["network"]
        return {
            "n_classes": int(self["dataset"]["n_classes"]),
            "matching_threshold": float(net["matching_threshold"]),
            "max_group_size": int(net["max_group_size"]),
            "weight_bits": int(net["weight_bits"]),
            "y_threshold": float(net["y_threshold"]),
            "dom_threshold": float(net["dom_threshold"]),
        }

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)


def _merge(base: dict, extra: dict, source: str):
    for key, value in extra.items():
        if key not in base:
            raise ConfigError(f"unknown config key {key!r} (from {source})")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{key!r} must be a mapping (from {source})")
            _merge(base[key], value, source)
        else:
            base[key] = value


def _env_overrides() -> dict:
    out: dict = {}
    for name, value in os.environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX):].lower().split("__")
        if path[0] == "mnist_dir":  # consumed by data.find_mnist_dir
            continue
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
        try:
            node[path[-1]] = yaml.safe_load(value)
        except yaml.YAMLError as exc:
            raise ConfigError(f"bad value in ${name}: {exc}") from exc
    return out
