import numpy as np
import pytest

from softsplit.errors import ConfigError, InactiveUserError
from softsplit.qos import (
    DelayParams,
    ReliabilityWindow,
    ServiceSpec,
    continuity_ratio,
    e2e_delay,
    load_factor,
    objective_value,
)
from softsplit.split_model import FSConfigTable

from test_split_model import make_table

SPEC = ServiceSpec(id=0, delay_threshold_ms=12.0, outage_threshold=1e-5)


class TestDelay:
    def test_component_sum(self):
        table = make_table(pe=2.5, pc=3.5, tx=2.0)
        params = DelayParams(hw_overhead_ms=1.0, load_lambda=2.0, load_threshold=0.8)
        d = e2e_delay(fs=3, transitional=False, gops_used=0.0, g_th=100.0, table=table, params=params)
        assert d.total_ms == pytest.approx(2.0 + 6.0 + 1.0)
        assert (d.tx_delay_ms, d.proc_delay_ms, d.hw_overhead_ms) == (2.0, 6.0, 1.0)

    def test_route_factor_applies_to_tx_only(self):
        table = make_table(pe=2.5, pc=3.5, tx=2.0)
        params = DelayParams(route_factor_transitional=1.5, hw_overhead_ms=1.0)
        d = e2e_delay(3, True, 0.0, 100.0, table, params)
        assert d.total_ms == pytest.approx(3.0 + 6.0 + 1.0)

    def test_zero_lambda_ignores_load(self):
        table = make_table(pe=2.5, pc=3.5, tx=2.0)
        params = DelayParams(load_lambda=0.0)
        totals = {
            e2e_delay(3, False, g, 100.0, table, params).total_ms for g in (0.0, 50.0, 99.0, 100.0)
        }
        assert len(totals) == 1

    def test_load_factor_kicks_in_above_threshold(self):
        params = DelayParams(load_lambda=2.0, load_threshold=0.8)
        assert load_factor(70.0, 100.0, params) == 1.0
        assert load_factor(90.0, 100.0, params) == pytest.approx(1.2)

    def test_default_table_delay_non_increasing_in_split(self):
        table = FSConfigTable.default()
        params = DelayParams()
        totals = [
            e2e_delay(fs, False, 0.0, 100.0, table, params).total_ms for fs in range(1, 8)
        ]
        for a, b in zip(totals, totals[1:]):
            assert b <= a

    def test_unserved_user_has_no_delay(self):
        with pytest.raises(InactiveUserError):
            e2e_delay(3, False, 0.0, 100.0, make_table(), DelayParams(), served=False)


class TestReliability:
    def test_all_below_threshold(self):
        w = ReliabilityWindow(50)
        for d in (5.0, 6.0, 7.0):
            est = w.record(delay_ms=d, spec=SPEC)
        assert est.epsilon == 0.0
        assert est.rho == 1.0

    def test_one_exceedance_of_two(self):
        w = ReliabilityWindow(50)
        w.record(delay_ms=5.0, spec=SPEC)
        est = w.record(delay_ms=13.0, spec=SPEC)
        assert est.epsilon == 0.5

    def test_dropped_timestep_counts_as_outage(self):
        w = ReliabilityWindow(50)
        for d in (5.0, 6.0, 7.0):
            w.record(delay_ms=d, spec=SPEC)
        est = w.record(outage=True)
        assert est.epsilon == 0.25

    def test_threshold_equality_is_not_outage(self):
        w = ReliabilityWindow(50)
        est = w.record(delay_ms=12.0, spec=SPEC)
        assert est.epsilon == 0.0

    def test_window_eviction(self):
        w = ReliabilityWindow(4)
        w.record(outage=True)
        for _ in range(4):
            est = w.record(outage=False)
        assert est.outage_count == 0
        assert est.window_size == 4

    def test_rho_plus_epsilon_is_one(self):
        rng = np.random.default_rng(0)
        w = ReliabilityWindow(10)
        for _ in range(100):
            est = w.record(outage=bool(rng.integers(2)))
            assert est.rho + est.epsilon == pytest.approx(1.0)

    def test_empty_window(self):
        est = ReliabilityWindow(5).estimate()
        assert est.epsilon == 0.0 and est.rho == 1.0

    def test_bad_capacity_and_args(self):
        with pytest.raises(ConfigError):
            ReliabilityWindow(0)
        with pytest.raises(ConfigError):
            ReliabilityWindow(5).record()


class TestContinuity:
    def test_all_satisfied(self):
        assert continuity_ratio([0.0, 0.0, 0.0], SPEC) == 1.0

    def test_boundary_is_strict(self):
        assert continuity_ratio([SPEC.outage_threshold], SPEC) == 0.0

    def test_three_of_four(self):
        eps = [0.0, 0.0, 0.0, 0.5]
        # direct count oracle
        expected = sum(1 for e in eps if e < SPEC.outage_threshold) / len(eps)
        assert continuity_ratio(eps, SPEC) == expected == 0.75

    def test_empty_group_is_vacuously_continuous(self):
        assert continuity_ratio([], SPEC) == 1.0

    def test_monotone_in_satisfied_count(self):
        base = [1.0] * 10
        prev = continuity_ratio(base, SPEC)
        for i in range(10):
            base[i] = 0.0
            cur = continuity_ratio(base, SPEC)
            assert cur >= prev
            prev = cur


class TestObjective:
    def test_weighted_sum(self):
        assert objective_value(0.8, 1.0, 0.5, 0.5) == pytest.approx(0.9)

    def test_zero_transitional_weight(self):
        assert objective_value(0.8, 1.0, 0.7, 0.0) == pytest.approx(0.56)

    def test_negative_weights_rejected(self):
        with pytest.raises(ConfigError):
            objective_value(0.5, 0.5, -0.1, 0.5)

    def test_common_scaling_preserves_argmax(self):
        # exhaustive check over a 196-entry instance
        rng = np.random.default_rng(2)
        pairs = rng.random((196, 2))
        base = [objective_value(r_nt, r_t, 0.5, 0.5) for r_nt, r_t in pairs]
        scaled = [objective_value(r_nt, r_t, 0.5 * 3.7, 0.5 * 3.7) for r_nt, r_t in pairs]
        assert int(np.argmax(base)) == int(np.argmax(scaled))
        assert scaled[0] == pytest.approx(3.7 * base[0])
