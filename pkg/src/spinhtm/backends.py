"""Compute backends: exact arithmetic, and the crossbar + spin-neuron model.

Both expose the same two operations the node inference chain needs: a bank
of dot products between one input vector and many stored patterns, and a
winner selection over the resulting values. The ideal backend returns exact
float dot products; the hardware backend programs the patterns into a
crossbar, drives it with input codes, and digitizes the column currents
with the SAR/WTA engine, so its values are integer codes.
"""

from __future__ import annotations

import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .crossbar import (ArrayConfig, CrossbarArray, DEFAULT_RANGE, DtcsConfig,
                       column_currents, inject_variation,
                       map_weights_to_conductances)
from .sar_wta import ReferenceDac, wta_select

PIXEL_INPUT = "pixels"
CHILD_INPUT = "children"


@dataclass(frozen=True)
class WinnerSelection:
    winner: int
    dom: float
    rejected: bool


class ComputeBackend(ABC):
    """Interface consumed by node inference."""

    y_threshold = 0.0

    @abstractmethod
    def dot_product_bank(self, x: np.ndarray, patterns: np.ndarray,
                         key=None, code_max=None) -> np.ndarray:
        """Value per stored pattern row for one input vector."""

    @abstractmethod
    def select_winner(self, values: np.ndarray,
                      dom_threshold: float = 0.0) -> WinnerSelection:
        """Lowest-index argmax with its degree of match; reject below threshold."""

    def input_code_max(self, node):
        return None

    def density_code_max(self, node):
        return None

    def one_hot_level(self, node) -> float:
        return 1.0

    def reset(self):
        """Drop any per-network cached state."""


class IdealBackend(ComputeBackend):
    """Exact float arithmetic reference."""

    def __init__(self, y_threshold: float = 0.0):
        self.y_threshold = y_threshold

    def dot_product_bank(self, x, patterns, key=None, code_max=None):
        patterns = np.asarray(patterns, dtype=np.float64)
        return patterns @ np.asarray(x, dtype=np.float64)

    def select_winner(self, values, dom_threshold=0.0):
        values = np.asarray(values, dtype=np.float64)
        winner = int(np.argmax(values))
        dom = float(values[winner])
        return WinnerSelection(winner=winner, dom=dom,
                               rejected=dom < dom_threshold)


class HardwareBackend(ComputeBackend):
    """Crossbar dot products digitized by the spin-neuron SAR/WTA engine.

    Stored patterns are programmed along crossbar columns; inputs arrive as
    DAC codes (pixel codes at level 1, one-hot full-scale codes for child
    messages, previous-stage output codes between the two stages). Built
    arrays are cached per node/stage key; device variation, when enabled,
    is drawn deterministically from (seed, key).
    """

    def __init__(self, array_config: ArrayConfig = DEFAULT_RANGE,
                 drive: DtcsConfig | None = None, resolution: int = 5,
                 pixel_code_max: int = 1, mode: str = "ideal",
                 comparator_threshold: float = 0.0, adc_dac: str = "linear",
                 variation_sigma: float = 0.0, seed: int = 0,
                 y_threshold: int = 0):
        self.array_config = array_config
        self.drive = drive if drive is not None else DtcsConfig()
        self.resolution = resolution
        self.pixel_code_max = pixel_code_max
        self.mode = mode
        self.comparator_threshold = comparator_threshold
        self.adc_dac = adc_dac
        self.variation_sigma = variation_sigma
        self.seed = seed
        self.y_threshold = y_threshold
        self._cache: dict = {}

    # -- node input encodings ------------------------------------------

    def input_code_max(self, node) -> int:
        if getattr(node, "input_kind", PIXEL_INPUT) == PIXEL_INPUT:
            return self.pixel_code_max
        return 1  # one-hot child messages drive at full scale

    def density_code_max(self, node) -> int:
        return (1 << self.resolution) - 1

    def one_hot_level(self, node) -> int:
        return (1 << self.resolution) - 1

    # -- bank evaluation -------------------------------------------------

    def dot_product_bank(self, x, patterns, key=None, code_max=None):
        codes = np.asarray(x, dtype=np.float64)
        if code_max is None:
            code_max = int(codes.max()) if codes.size and codes.max() > 0 else 1
        arr, dac = self._array_for(key, patterns, code_max)
        currents = column_currents(arr, codes, self.drive, mode=self.mode,
                                   code_max=code_max)
        result = wta_select(currents, dac,
                            i_threshold=self.comparator_threshold)
        return result.codes

    def select_winner(self, values, dom_threshold=0.0):
        codes = np.asarray(values)
        winner = int(np.argmax(codes))
        dom = float(codes[winner])
        return WinnerSelection(winner=winner, dom=dom,
                               rejected=dom < dom_threshold)

    def reset(self):
        self._cache.clear()

    def _array_for(self, key, patterns, code_max):
        if key is not None and key in self._cache:
            return self._cache[key]
        built = self._build_array(key, patterns, code_max)
        if key is not None:
            self._cache[key] = built
        return built

    def _build_array(self, key, patterns, code_max
                     ) -> tuple[CrossbarArray, ReferenceDac]:
        weights = np.asarray(patterns, dtype=np.float64).T  # columns = patterns
        arr = map_weights_to_conductances(weights, self.array_config)
        if self.variation_sigma > 0:
            arr = inject_variation(arr, self.variation_sigma,
                                   seed=self._derive_seed(key))
        # ADC full scale calibrated to the largest column current under a
        # full-scale input drive (wire-free estimate)
        full_codes = np.full(arr.rows, code_max, dtype=np.float64)
        peak = column_currents(arr, full_codes, self.drive, mode="ideal",
                               code_max=code_max)
        full_scale = float(peak.max())
        if full_scale <= 0:
            full_scale = self.drive.delta_v * self.drive.gt_full
        dac = ReferenceDac(full_scale, self.resolution, kind=self.adc_dac,
                           dtcs=self.drive)
        return arr, dac

    def _derive_seed(self, key) -> int:
        digest = zlib.crc32(repr(key).encode("utf-8"))
        return (int(self.seed) << 32) ^ digest
