import numpy as np
import pytest

from spinhtm.energy import (EnergyParams, NodeActivity, mtj_read_energy,
                            neuron_switch_energy, node_energy_report,
                            rcn_static_energy, threshold_sweep)
from spinhtm.errors import MissingActivity

PARAMS = EnergyParams()
LEVEL2 = NodeActivity(n_inputs_stage1=256, n_columns_stage1=270,
                      n_columns_stage2=64, resolution=5)


class TestPerEventEnergies:
    def test_switch_energy_50uA_50mV_1ns(self):
        assert neuron_switch_energy(50e-6, 50e-3, 1e-9) == pytest.approx(
            2.5e-15, rel=1e-12)

    def test_switch_energy_50uA_100mV_1ns(self):
        assert neuron_switch_energy(50e-6, 100e-3, 1e-9) == pytest.approx(
            5e-15, rel=1e-12)

    def test_read_energy_03uA_08V_1ns(self):
        assert mtj_read_energy(0.3e-6, 0.8, 1e-9) == pytest.approx(0.24e-15,
                                                                   rel=1e-12)

    def test_per_event_total_close_to_3fJ(self):
        total = (neuron_switch_energy(50e-6, 50e-3, 1e-9)
                 + mtj_read_energy(0.3e-6, 0.8, 1e-9))
        assert total == pytest.approx(2.74e-15, rel=1e-12)
        assert total < 3e-15

    def test_zero_factor_zero_energy(self):
        assert neuron_switch_energy(0.0, 50e-3, 1e-9) == 0.0
        assert mtj_read_energy(0.3e-6, 0.8, 0.0) == 0.0

    def test_static_sink_spans_twice_delta_v(self):
        assert rcn_static_energy(50e-6, PARAMS, 1e-9) == pytest.approx(5e-15)
        assert rcn_static_energy(0.0, PARAMS, 1e-9) == 0.0

    def test_static_linear_in_delta_v(self):
        doubled = EnergyParams(delta_v=100e-3)
        assert rcn_static_energy(50e-6, doubled, 1e-9) == pytest.approx(
            2 * rcn_static_energy(50e-6, PARAMS, 1e-9))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            neuron_switch_energy(-1e-6, 50e-3, 1e-9)


class TestNodeReport:
    def test_breakdown_sums_to_total(self):
        rep = node_energy_report(LEVEL2, PARAMS)
        parts = (rep.rcn_static + rep.neuron_switching + rep.mtj_read
                 + rep.dac_dynamic + rep.digital_wta)
        assert rep.total == pytest.approx(parts, rel=1e-12)
        assert rep.static_total + rep.dynamic_total == pytest.approx(rep.total)

    def test_level2_total_in_tens_of_picojoules(self):
        rep = node_energy_report(LEVEL2, PARAMS)
        assert 24e-12 <= rep.total <= 72e-12

    def test_cmos_ratio_over_100(self):
        rep = node_energy_report(LEVEL2, PARAMS)
        assert rep.cmos_reference_total == pytest.approx(
            PARAMS.cmos_memory_read_energy + PARAMS.cmos_dac_energy
            + PARAMS.cmos_compute_energy)
        assert rep.ratio > 100.0

    def test_zero_activity_zero_breakdown(self):
        idle = NodeActivity(n_inputs_stage1=0, n_columns_stage1=0,
                            n_columns_stage2=0, resolution=5, evaluations=0)
        rep = node_energy_report(idle, PARAMS)
        assert rep.total == 0.0
        assert rep.rcn_static == rep.neuron_switching == rep.mtj_read == 0.0
        assert rep.dac_dynamic == rep.digital_wta == 0.0
        assert rep.cmos_reference_total == 0.0
        assert rep.ratio == 0.0

    def test_monotone_in_threshold_and_delta_v(self):
        totals_thr = [node_energy_report(LEVEL2,
                                         PARAMS.with_threshold(t)).total
                      for t in np.linspace(0.25e-6, 8e-6, 12)]
        assert all(b >= a for a, b in zip(totals_thr, totals_thr[1:]))
        totals_dv = [node_energy_report(
            LEVEL2, EnergyParams(delta_v=dv)).total
            for dv in np.linspace(20e-3, 120e-3, 8)]
        assert all(b >= a for a, b in zip(totals_dv, totals_dv[1:]))

    def test_static_dynamic_crossover_exists(self):
        thresholds = np.linspace(0.25e-6, 8e-6, 32)
        rows = threshold_sweep(LEVEL2, PARAMS, thresholds)
        static_minus_dynamic = [r["static_j"] - r["dynamic_j"] for r in rows]
        assert static_minus_dynamic[0] < 0   # dynamic dominates at low Ic
        assert static_minus_dynamic[-1] > 0  # static dominates at high Ic

    def test_missing_activity(self):
        with pytest.raises(MissingActivity):
            NodeActivity(n_inputs_stage1=-1, n_columns_stage1=1,
                         n_columns_stage2=1)
        with pytest.raises(MissingActivity):
            node_energy_report(None, PARAMS)
