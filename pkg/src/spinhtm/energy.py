"""Per-event and per-node energy accounting for the spin/crossbar design.

Static components (array read-out current, neuron switching) scale with the
comparator threshold because every current in the design is sized relative
to what the neuron needs to switch; dynamic components (MTJ reads, DAC and
digital winner-tracking activity) do not. The CMOS reference is three fixed
constants: memory read, weight DAC, and a lumped digital-compute term.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import MissingActivity


@dataclass(frozen=True)
class EnergyParams:
    """Electrical operating point plus calibration constants."""

    delta_v: float = 50e-3          # DAC headroom above the clamp (V)
    v_clamp: float = 0.8            # common-mode clamp level (V)
    i_threshold: float = 2e-6       # comparator switching current (A)
    t_switch: float = 1e-9          # neuron switching / read window (s)
    read_current: float = 0.3e-6    # MTJ sense current (A)
    read_voltage: float = 0.8       # MTJ sense supply (V)
    data_rate: float = 100e6        # input refresh rate (Hz)
    wire_cap_per_um: float = 0.4e-15
    cell_pitch_um: float = 2.0
    # average column current per unit of comparator threshold: 50 uA of
    # column current at a 2 uA threshold
    current_per_threshold: float = 25.0
    # per column-bit cycle of tracking/SAR logic in scaled CMOS
    e_digital_per_col_bit: float = 8e-15
    # per DAC event (input drive refresh or one SAR trial)
    e_dac_event: float = 4e-15
    # CMOS reference node constants
    cmos_memory_read_energy: float = 1e-9
    cmos_dac_energy: float = 70e-12
    cmos_compute_energy: float = 8.53e-9

    def __post_init__(self):
        for name in ("delta_v", "v_clamp", "i_threshold", "t_switch",
                     "read_current", "read_voltage", "data_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def cmos_reference(self) -> float:
        return (self.cmos_memory_read_energy + self.cmos_dac_energy
                + self.cmos_compute_energy)

    def with_threshold(self, i_threshold: float) -> "EnergyParams":
        return replace(self, i_threshold=i_threshold)


def neuron_switch_energy(i_avg: float, v_level: float, t: float) -> float:
    """Static switching burn: column current across the input level for t."""
    _require_nonnegative(i_avg=i_avg, v_level=v_level, t=t)
    return i_avg * v_level * t


def mtj_read_energy(i_read: float, v_supply: float, t: float) -> float:
    """State readout burn of one tunnel-junction sense."""
    _require_nonnegative(i_read=i_read, v_supply=v_supply, t=t)
    return i_read * v_supply * t


def rcn_static_energy(total_column_current: float, params: EnergyParams,
                      t_eval: float) -> float:
    """Array read-out current sunk across the 2*delta_v window for t_eval."""
    _require_nonnegative(total_column_current=total_column_current, t_eval=t_eval)
    return total_column_current * 2.0 * params.delta_v * t_eval


@dataclass(frozen=True)
class NodeActivity:
    """Event counts for one node inference cycle (two dot-product stages)."""

    n_inputs_stage1: int
    n_columns_stage1: int     # stored spatial patterns
    n_columns_stage2: int     # temporal groups / classes
    resolution: int = 5
    evaluations: int = 1

    def __post_init__(self):
        for name in ("n_inputs_stage1", "n_columns_stage1", "n_columns_stage2",
                     "resolution", "evaluations"):
            value = getattr(self, name)
            if value is None or value < 0:
                raise MissingActivity(f"activity count {name} missing or negative")

    @property
    def n_inputs_stage2(self) -> int:
        return self.n_columns_stage1

    @property
    def total_columns(self) -> int:
        return self.n_columns_stage1 + self.n_columns_stage2


@dataclass(frozen=True)
class EnergyBreakdown:
    rcn_static: float
    neuron_switching: float
    mtj_read: float
    dac_dynamic: float
    digital_wta: float
    total: float
    cmos_reference_total: float
    ratio: float

    @property
    def static_total(self) -> float:
        return self.rcn_static + self.neuron_switching

    @property
    def dynamic_total(self) -> float:
        return self.mtj_read + self.dac_dynamic + self.digital_wta

    def as_dict(self) -> dict:
        return {
            "rcn_static_j": self.rcn_static,
            "neuron_switching_j": self.neuron_switching,
            "mtj_read_j": self.mtj_read,
            "dac_dynamic_j": self.dac_dynamic,
            "digital_wta_j": self.digital_wta,
            "static_total_j": self.static_total,
            "dynamic_total_j": self.dynamic_total,
            "total_j": self.total,
            "cmos_reference_total_j": self.cmos_reference_total,
            "ratio_cmos_over_design": self.ratio,
        }


def node_energy_report(activity: NodeActivity,
                       params: EnergyParams) -> EnergyBreakdown:
    """Sum per-event energies over one node's activity counts."""
    if activity is None:
        raise MissingActivity("no activity counts supplied")
    bits = activity.resolution
    cols = activity.total_columns
    col_bits = cols * bits * activity.evaluations
    i_avg = params.current_per_threshold * params.i_threshold

    switching = col_bits * neuron_switch_energy(i_avg, params.delta_v,
                                                params.t_switch)
    reads = col_bits * mtj_read_energy(params.read_current, params.read_voltage,
                                       params.t_switch)
    conversion_window = bits * params.t_switch
    static = activity.evaluations * rcn_static_energy(
        cols * i_avg, params, conversion_window)

    # DAC events: one input refresh per row per stage plus one reference
    # trial per column per bit; column wire capacitance swings 2*delta_v
    dac_events = activity.evaluations * (
        activity.n_inputs_stage1 + activity.n_inputs_stage2 + col_bits)
    wire_cap_1 = (activity.n_inputs_stage1 * params.cell_pitch_um
                  * params.wire_cap_per_um)
    wire_cap_2 = (activity.n_inputs_stage2 * params.cell_pitch_um
                  * params.wire_cap_per_um)
    cap_energy = (activity.n_columns_stage1 * wire_cap_1
                  + activity.n_columns_stage2 * wire_cap_2) \
        * (2.0 * params.delta_v) ** 2 * activity.evaluations
    dac = dac_events * params.e_dac_event + cap_energy

    digital = col_bits * params.e_digital_per_col_bit

    total = static + switching + reads + dac + digital
    cmos_total = params.cmos_reference * activity.evaluations
    ratio = cmos_total / total if total > 0 else 0.0
    return EnergyBreakdown(
        rcn_static=static, neuron_switching=switching, mtj_read=reads,
        dac_dynamic=dac, digital_wta=digital, total=total,
        cmos_reference_total=cmos_total, ratio=ratio)


def threshold_sweep(activity: NodeActivity, params: EnergyParams,
                    thresholds) -> list[dict]:
    """Energy table across comparator thresholds at a fixed activity."""
    rows = []
    for thr in thresholds:
        report = node_energy_report(activity, params.with_threshold(thr))
        rows.append({
            "i_threshold_a": thr,
            "delta_v_v": params.delta_v,
            "static_j": report.static_total,
            "dynamic_j": report.dynamic_total,
            "total_j": report.total,
        })
    return rows


def _require_nonnegative(**values):
    for name, value in values.items():
        if value < 0:
            raise ValueError(f"{name} must be nonnegative")
