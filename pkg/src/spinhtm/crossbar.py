"""Resistive crossbar model: conductance mapping, current-source drive,
column-current evaluation under three fidelity levels, device variation,
and detection-margin analysis.

Stored patterns live along columns. Each row is driven by a deep-triode
current-source (DTCS) DAC from a rail at V+dV; the column ends are clamped
at V by the receiving neurons, so every programmed cell sees dV across the
(source, wire, cell) path. Dummy devices pad each row so the total row
conductance is identical everywhere, which makes the source loading
pattern-independent.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import LengthMismatch, NegativeWeight, SingularSystem, TooFewColumns

MODES = ("ideal", "lumped", "nodal")


@dataclass(frozen=True)
class ArrayConfig:
    """Programmable range and parasitics of one crossbar array."""

    g_min: float = 1.0 / 32e3      # 32 kOhm
    g_max: float = 1.0 / 1e3       # 1 kOhm
    weight_bits: int = 5
    wire_r_per_um: float = 1.0
    cell_pitch_um: float = 2.0
    access_r: float = 0.0          # series ON-resistance of an access device

    def __post_init__(self):
        if self.g_min <= 0 or self.g_max <= self.g_min:
            raise ValueError("need 0 < g_min < g_max")
        if self.weight_bits < 1:
            raise ValueError("weight_bits must be >= 1")
        if self.wire_r_per_um < 0 or self.cell_pitch_um < 0:
            raise ValueError("parasitics must be nonnegative")

    def scaled(self, factor: float) -> "ArrayConfig":
        """Same config with the conductance window scaled by `factor`."""
        return replace(self, g_min=self.g_min * factor, g_max=self.g_max * factor)


# Table-style default (1 kOhm .. 32 kOhm) and the low-resistance alternative
# usable when no access transistor is present.
DEFAULT_RANGE = ArrayConfig()
LOW_RANGE = ArrayConfig(g_min=1.0 / 6.4e3, g_max=1.0 / 200.0)


@dataclass(frozen=True)
class DtcsConfig:
    """Current-source DAC: headroom above the clamp and full-scale conductance."""

    delta_v: float = 50e-3
    gt_full: float = 1e-3
    input_bits: int = 5

    def __post_init__(self):
        if self.delta_v <= 0 or self.gt_full <= 0:
            raise ValueError("delta_v and gt_full must be positive")
        if self.input_bits < 1:
            raise ValueError("input_bits must be >= 1")


@dataclass
class CrossbarArray:
    """Programmed conductance matrix plus its equalizing dummies and wiring."""

    g: np.ndarray                  # (rows, cols) programmed conductances
    g_dummy: np.ndarray            # (rows,) dummy conductance per row
    config: ArrayConfig
    variation_sigma: float = 0.0
    seed: int | None = None

    @property
    def rows(self) -> int:
        return self.g.shape[0]

    @property
    def cols(self) -> int:
        return self.g.shape[1]

    @property
    def gts(self) -> np.ndarray:
        """Per-row total device conductance (programmed + dummy)."""
        return self.g.sum(axis=1) + self.g_dummy

    def cell_conductances(self) -> np.ndarray:
        """Programmed conductances with any access-device resistance folded in."""
        if self.config.access_r <= 0:
            return self.g
        return 1.0 / (1.0 / self.g + self.config.access_r)

    def dummy_conductances(self) -> np.ndarray:
        if self.config.access_r <= 0:
            return self.g_dummy
        out = np.zeros_like(self.g_dummy)
        nz = self.g_dummy > 0
        out[nz] = 1.0 / (1.0 / self.g_dummy[nz] + self.config.access_r)
        return out


def map_weights_to_conductances(weights: np.ndarray,
                                config: ArrayConfig = DEFAULT_RANGE,
                                w_max: float | None = None) -> CrossbarArray:
    """Linear weight-to-conductance programming with dummy equalization.

    Codes are round-half-up on a (2**weight_bits - 1)-level grid; zero weight
    programs g_min. Each row gets one dummy device sized so every row's total
    conductance equals the array-wide maximum.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError("weights must be a 2-D matrix")
    if np.any(w < 0):
        raise NegativeWeight("crossbar weights must be nonnegative")
    if w_max is None:
        w_max = float(w.max())
    levels = (1 << config.weight_bits) - 1
    if w_max <= 0:
        codes = np.zeros_like(w)
    else:
        codes = np.floor(w / w_max * levels + 0.5)
        codes = np.clip(codes, 0, levels)
    g = config.g_min + codes * (config.g_max - config.g_min) / levels
    row_sums = g.sum(axis=1)
    g_dummy = row_sums.max() - row_sums
    return CrossbarArray(g=g, g_dummy=g_dummy, config=config)


def dtcs_current(code: float, cfg: DtcsConfig, gts: float) -> float:
    """Row current delivered by one DTCS at the given input code.

    The source conductance loads against the total row conductance, which is
    what makes the transfer nonlinear in the code.
    """
    full = (1 << cfg.input_bits) - 1
    gt = code / full * cfg.gt_full
    if gt == 0.0:
        return 0.0
    return cfg.delta_v * gt * gts / (gt + gts)


def cell_current(code: float, cfg: DtcsConfig, gts: float, g_ij: float) -> float:
    """Share of the row current through a single cell: dtcs_current * g/gts."""
    full = (1 << cfg.input_bits) - 1
    gt = code / full * cfg.gt_full
    if gt == 0.0 or g_ij == 0.0:
        return 0.0
    return cfg.delta_v * gt * g_ij / (gt + gts)


def _source_conductances(codes: np.ndarray, cfg: DtcsConfig,
                         code_max: int | None) -> np.ndarray:
    full = code_max if code_max is not None else (1 << cfg.input_bits) - 1
    return np.asarray(codes, dtype=np.float64) / full * cfg.gt_full


def column_currents(arr: CrossbarArray, codes: np.ndarray, cfg: DtcsConfig,
                    mode: str = "ideal", code_max: int | None = None) -> np.ndarray:
    """Currents into the column clamps for one input vector.

    ideal  — no wire resistance; per-cell current formula summed per column.
    lumped — each cell derated by its accumulated wire path resistance.
    nodal  — full Kirchhoff solution of the wire/cell/source network.
    """
    codes = np.asarray(codes, dtype=np.float64)
    if codes.shape != (arr.rows,):
        raise LengthMismatch(f"need {arr.rows} input codes, got {codes.shape}")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "nodal":
        _, currents = solve_nodal(arr, codes, cfg, code_max=code_max)
        return currents
    if mode == "ideal":
        return _ideal_currents(arr.cell_conductances(), arr.dummy_conductances(),
                               codes, cfg, code_max)
    return _lumped_currents(arr, codes, cfg, code_max)


def _ideal_currents(g: np.ndarray, g_dummy: np.ndarray, codes: np.ndarray,
                    cfg: DtcsConfig, code_max: int | None) -> np.ndarray:
    gt = _source_conductances(codes, cfg, code_max)
    gts = g.sum(axis=1) + g_dummy
    drive = np.zeros_like(gt)
    active = gt > 0
    drive[active] = cfg.delta_v * gt[active] / (gt[active] + gts[active])
    return drive @ g


def _lumped_currents(arr: CrossbarArray, codes: np.ndarray, cfg: DtcsConfig,
                     code_max: int | None) -> np.ndarray:
    r_seg = arr.config.wire_r_per_um * arr.config.cell_pitch_um
    g = arr.cell_conductances()
    g_dummy = arr.dummy_conductances()
    if r_seg == 0.0:
        return _ideal_currents(g, g_dummy, codes, cfg, code_max)
    rows, cols = g.shape
    # path length in segments: j along the row from the driver, (rows - i)
    # down the column to the clamp
    jj = np.arange(cols)[None, :]
    ii = np.arange(rows)[:, None]
    r_path = r_seg * (jj + (rows - ii))
    r_path = np.broadcast_to(r_path, g.shape)
    g_eff = np.zeros_like(g)
    nz = g > 0
    g_eff[nz] = 1.0 / (1.0 / g[nz] + r_path[nz])
    dummy_eff = np.zeros_like(g_dummy)
    dz = g_dummy > 0
    dummy_eff[dz] = 1.0 / (1.0 / g_dummy[dz] + r_seg * (cols - 1))
    return _ideal_currents(g_eff, dummy_eff, codes, cfg, code_max)


def solve_nodal(arr: CrossbarArray, codes: np.ndarray, cfg: DtcsConfig,
                code_max: int | None = None):
    """Exact DC solution of the crossbar resistive network.

    Nodes: one per row-bar crossing and one per column-bar crossing. The
    DTCS of each row is a code-dependent conductance from the dV rail to the
    row's first crossing; the far end of every column bar is clamped (taken
    as 0 V, with the rail at dV — only the difference matters). Dummies hang
    off the last row crossing straight onto the clamp rail.

    Returns (node voltages as a dict of arrays, per-column clamp currents).
    """
    codes = np.asarray(codes, dtype=np.float64)
    if codes.shape != (arr.rows,):
        raise LengthMismatch(f"need {arr.rows} input codes, got {codes.shape}")
    g = arr.cell_conductances()
    g_dummy = arr.dummy_conductances()
    gt = _source_conductances(codes, cfg, code_max)
    r_seg = arr.config.wire_r_per_um * arr.config.cell_pitch_um

    if r_seg == 0.0:
        # zero-length wires merge each bar into a single node; the ideal
        # formula is the exact solution
        currents = _ideal_currents(g, g_dummy, codes, cfg, code_max)
        gts = g.sum(axis=1) + g_dummy
        active = gt > 0
        v_bar = np.where(active,
                         cfg.delta_v * gt / np.where(active, gt + gts, 1.0),
                         0.0)
        v_row = np.tile(v_bar[:, None], (1, arr.cols))
        return {"row": v_row, "col": np.zeros((arr.rows, arr.cols))}, currents

    rows, cols = g.shape
    n_unknowns = 2 * rows * cols
    g_seg = 1.0 / r_seg

    def row_node(i, j):
        return i * cols + j

    def col_node(i, j):
        return rows * cols + i * cols + j

    entries_i, entries_j, entries_v = [], [], []
    rhs = np.zeros(n_unknowns)

    def stamp(a, b, cond):
        # conductance between unknown nodes a and b
        entries_i.extend((a, b, a, b))
        entries_j.extend((a, b, b, a))
        entries_v.extend((cond, cond, -cond, -cond))

    def stamp_to_rail(a, cond, v_rail):
        entries_i.append(a)
        entries_j.append(a)
        entries_v.append(cond)
        rhs[a] += cond * v_rail

    for i in range(rows):
        if gt[i] > 0:
            stamp_to_rail(row_node(i, 0), gt[i], cfg.delta_v)
        for j in range(cols - 1):
            stamp(row_node(i, j), row_node(i, j + 1), g_seg)
        if g_dummy[i] > 0:
            stamp_to_rail(row_node(i, cols - 1), g_dummy[i], 0.0)
        for j in range(cols):
            if g[i, j] > 0:
                stamp(row_node(i, j), col_node(i, j), g[i, j])
    for j in range(cols):
        for i in range(rows - 1):
            stamp(col_node(i, j), col_node(i + 1, j), g_seg)
        stamp_to_rail(col_node(rows - 1, j), g_seg, 0.0)

    matrix = sp.coo_matrix((entries_v, (entries_i, entries_j)),
                           shape=(n_unknowns, n_unknowns)).tocsr()
    diag = matrix.diagonal()
    if np.any(diag == 0.0):
        raise SingularSystem("floating node: zero total conductance somewhere")
    try:
        solution = spla.spsolve(matrix, rhs)
    except RuntimeError as exc:  # umfpack/superlu singularity
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(solution)):
        raise SingularSystem("non-finite node voltages")

    v_row = solution[: rows * cols].reshape(rows, cols)
    v_col = solution[rows * cols:].reshape(rows, cols)
    clamp_currents = g_seg * v_col[rows - 1, :]
    voltages = {"row": v_row, "col": v_col}
    return voltages, clamp_currents


def kcl_residual(arr: CrossbarArray, codes: np.ndarray, cfg: DtcsConfig,
                 code_max: int | None = None) -> float:
    """Relative mismatch between total injected and total clamped current."""
    codes = np.asarray(codes, dtype=np.float64)
    voltages, clamp_currents = solve_nodal(arr, codes, cfg, code_max=code_max)
    gt = _source_conductances(codes, cfg, code_max)
    injected = float(np.sum(gt * (cfg.delta_v - voltages["row"][:, 0])))
    g_dummy = arr.dummy_conductances()
    r_seg = arr.config.wire_r_per_um * arr.config.cell_pitch_um
    if r_seg == 0.0:
        return 0.0
    dummy_sink = float(np.sum(g_dummy * voltages["row"][:, -1]))
    total_out = float(clamp_currents.sum()) + dummy_sink
    if injected == 0.0:
        return abs(total_out)
    return abs(injected - total_out) / abs(injected)


def inject_variation(arr: CrossbarArray, sigma: float,
                     seed: int | None = 0) -> CrossbarArray:
    """Multiplicative Normal(1, sigma) device variation, clamped to the range.

    Deterministic for a given seed; sigma = 0 returns an identical copy.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0:
        return CrossbarArray(g=arr.g.copy(), g_dummy=arr.g_dummy.copy(),
                             config=arr.config, variation_sigma=0.0, seed=seed)
    rng = np.random.default_rng(seed)
    factors = rng.normal(1.0, sigma, size=arr.g.shape)
    g = np.clip(arr.g * factors, arr.config.g_min, arr.config.g_max)
    dummy_factors = rng.normal(1.0, sigma, size=arr.g_dummy.shape)
    g_dummy = np.where(arr.g_dummy > 0,
                       np.maximum(arr.g_dummy * dummy_factors, 0.0),
                       arr.g_dummy)
    return CrossbarArray(g=g, g_dummy=g_dummy, config=arr.config,
                         variation_sigma=sigma, seed=seed)


def detection_margin(currents: np.ndarray) -> float:
    """(best - second best) / best over the column outputs."""
    values = np.asarray(currents, dtype=np.float64)
    if values.size < 2:
        raise TooFewColumns("detection margin needs at least two columns")
    order = np.sort(values)[::-1]
    best, second = order[0], order[1]
    if best == 0.0:
        return 0.0
    return float((best - second) / best)
