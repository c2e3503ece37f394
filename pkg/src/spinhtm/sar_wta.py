"""Domain-wall comparator, SAR digitization, and the bit-serial WTA.

The comparator is behavioral: a free magnetic domain flips polarity when the
net input current magnitude reaches its switching threshold and otherwise
holds state (hysteresis dead zone). Digitization is a standard MSB-first
successive approximation per column; the winner-tracking registers run in
lockstep with it, one detection-line round per bit, so the surviving set
after each bit is exactly the set of columns whose code prefix is maximal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .crossbar import DtcsConfig, dtcs_current
from .errors import CursorOverrun


@dataclass
class DwnComparator:
    """Current comparator with a hysteresis dead zone of +/- i_threshold."""

    i_threshold: float = 2e-6
    t_switch: float = 1e-9
    state: int = 0

    def compare(self, i_net: float) -> int:
        if i_net >= self.i_threshold:
            self.state = 1
        elif i_net <= -self.i_threshold:
            self.state = 0
        return self.state


def dwn_compare(cmp: DwnComparator, i_net: float) -> int:
    return cmp.compare(i_net)


class ReferenceDac:
    """Per-column reference DAC for the SAR loop.

    linear mode emits code * lsb; dtcs mode reuses the current-source model
    (and therefore its loading nonlinearity), scaled so the top code lands on
    full_scale.
    """

    def __init__(self, full_scale: float, resolution: int,
                 kind: str = "linear", dtcs: DtcsConfig | None = None,
                 dtcs_gts: float | None = None):
        if kind not in ("linear", "dtcs"):
            raise ValueError("kind must be 'linear' or 'dtcs'")
        if full_scale <= 0:
            raise ValueError("full_scale must be positive")
        self.full_scale = float(full_scale)
        self.resolution = int(resolution)
        self.kind = kind
        self.top = (1 << resolution) - 1
        if kind == "dtcs":
            self._dtcs = dtcs if dtcs is not None else DtcsConfig(
                input_bits=resolution)
            self._gts = dtcs_gts if dtcs_gts is not None else 100.0 * self._dtcs.gt_full
            peak = dtcs_current(self.top, self._dtcs_full(), self._gts)
            self._scale = self.full_scale / peak
        else:
            self._dtcs = None

    def _dtcs_full(self) -> DtcsConfig:
        if self._dtcs.input_bits == self.resolution:
            return self._dtcs
        from dataclasses import replace
        return replace(self._dtcs, input_bits=self.resolution)

    @property
    def lsb(self) -> float:
        return self.full_scale / self.top

    def level(self, code: int) -> float:
        if self.kind == "linear":
            return code * self.lsb
        return self._scale * dtcs_current(code, self._dtcs_full(), self._gts)


def sar_convert(i_in: float, dac: ReferenceDac, cmp: DwnComparator | None = None,
                resolution: int | None = None) -> int:
    """MSB-first successive approximation of one current.

    With an ideal comparator (zero threshold) and a linear DAC the result is
    floor(i_in / lsb) clamped to the code range. A finite threshold leaves
    trials inside the dead zone at the comparator's previous state.
    """
    res = resolution if resolution is not None else dac.resolution
    if cmp is None:
        cmp = DwnComparator(i_threshold=0.0)
    cmp.state = 0  # defined state at conversion start
    code = 0
    for bit in range(res - 1, -1, -1):
        trial = code | (1 << bit)
        if cmp.compare(i_in - dac.level(trial)):
            code = trial
    return code


@dataclass
class SarWtaState:
    """Registers of the combined SAR + winner-tracking engine."""

    resolution: int
    n_columns: int
    dom_threshold: int = 0
    sar: np.ndarray = field(init=False)
    tr: np.ndarray = field(init=False)
    dr: np.ndarray = field(init=False)
    dl: bool = field(init=False, default=True)
    bit_cursor: int = field(init=False)

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")
        self.sar = np.zeros(self.n_columns, dtype=np.int64)
        # every column is tracked until some column pulls ahead
        self.tr = np.ones(self.n_columns, dtype=bool)
        self.dr = np.zeros(self.n_columns, dtype=bool)
        self.bit_cursor = self.resolution - 1

    @property
    def done(self) -> bool:
        return self.bit_cursor < 0

    def survivors(self) -> np.ndarray:
        return np.flatnonzero(self.tr)


def wta_step(state: SarWtaState, per_column_bits: np.ndarray) -> SarWtaState:
    """One detection-line round: drop tracked columns that fell behind.

    per_column_bits holds each column's comparator outcome for the current
    bit. The detection line is precharged and the discharge registers
    cleared; any tracked column resolving 1 discharges the line, and then
    every tracked column resolving 0 is untracked. If nothing discharges,
    the tracked set is unchanged.
    """
    if state.done:
        raise CursorOverrun("all bits already processed")
    bits = np.asarray(per_column_bits, dtype=bool)
    if bits.shape != (state.n_columns,):
        raise ValueError(f"need {state.n_columns} comparator outcomes")
    state.dl = True
    state.dr = state.tr & bits
    if state.dr.any():
        state.dl = False
        state.tr = state.tr & bits
    state.bit_cursor -= 1
    return state


@dataclass
class WtaResult:
    winner: int | None
    dom: int
    codes: np.ndarray
    survivors: np.ndarray
    rejected: bool
    comparisons: int
    trace: list | None = None


def wta_select(currents: np.ndarray, dac: ReferenceDac,
               i_threshold: float = 0.0, dom_threshold: int = 0,
               trace: bool = False) -> WtaResult:
    """Digitize all columns in lockstep and track the winner per bit.

    Each column owns one comparator (reset at conversion start) and one DAC.
    After the last bit the tracked columns hold the maximum code; the winner
    is the lowest-index survivor and its code is the degree of match. A DOM
    below dom_threshold rejects the winner.
    """
    values = np.asarray(currents, dtype=np.float64)
    if values.ndim != 1 or values.size < 1:
        raise ValueError("need a 1-D vector of at least one column current")
    n = values.size
    res = dac.resolution
    state = SarWtaState(resolution=res, n_columns=n, dom_threshold=dom_threshold)
    cmp_state = np.zeros(n, dtype=bool)  # per-column comparator, reset to 0
    comparisons = 0
    rows = [] if trace else None

    for bit in range(res - 1, -1, -1):
        trial = state.sar | (1 << bit)
        levels = np.array([dac.level(int(t)) for t in trial]) \
            if dac.kind == "dtcs" else trial * dac.lsb
        diff = values - levels
        high = diff >= i_threshold
        low = diff <= -i_threshold
        cmp_state = np.where(high, True, np.where(low, False, cmp_state))
        comparisons += n
        keep = cmp_state
        state.sar = np.where(keep, trial, state.sar)
        wta_step(state, keep)
        if rows is not None:
            rows.extend((col, int(trial[col]), int(keep[col]), int(state.tr[col]))
                        for col in range(n))

    survivors = state.survivors()
    winner = int(survivors[0]) if survivors.size else None
    dom = int(state.sar[winner]) if winner is not None else 0
    rejected = winner is None or dom < dom_threshold
    return WtaResult(winner=winner, dom=dom, codes=state.sar.copy(),
                     survivors=survivors, rejected=rejected,
                     comparisons=comparisons, trace=rows)


def sar_convert_bank(currents: np.ndarray, dac: ReferenceDac,
                     i_threshold: float = 0.0) -> np.ndarray:
    """Vectorized independent SAR conversion of many columns at once."""
    values = np.asarray(currents, dtype=np.float64)
    n = values.size
    codes = np.zeros(n, dtype=np.int64)
    cmp_state = np.zeros(n, dtype=bool)
    for bit in range(dac.resolution - 1, -1, -1):
        trial = codes | (1 << bit)
        if dac.kind == "dtcs":
            levels = np.array([dac.level(int(t)) for t in trial])
        else:
            levels = trial * dac.lsb
        diff = values - levels
        cmp_state = np.where(diff >= i_threshold, True,
                             np.where(diff <= -i_threshold, False, cmp_state))
        codes = np.where(cmp_state, trial, codes)
    return codes
