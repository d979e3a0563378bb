import numpy as np
import pytest

from softsplit.env import (
    EnvConfig,
    SoftSplitEnv,
    compute_reward_high,
    compute_reward_low,
)
from softsplit.errors import ActionError, ProtocolError
from softsplit.qos import DelayParams, ServiceSpec
from softsplit.scenario import UserStatus

from test_split_model import make_table


def small_cfg(**kw) -> EnvConfig:
    defaults = dict(n_users=12, n_ecs=2, aps_per_ec=2, area=(400.0, 200.0), episode_len=20, seed=0)
    defaults.update(kw)
    return EnvConfig(**defaults)


def run_steps(env, n, ft=3, fnt=3):
    outs = []
    for _ in range(n):
        env.step_high(ft)
        outs.append(env.step_low([fnt] * len(env.ec_order)))
    return outs


class TestReset:
    def test_default_all_connected(self):
        env = SoftSplitEnv(EnvConfig())
        assert sum(1 for u in env.users if u.connected) == 50
        assert env.high_obs().n_transitional >= 0

    def test_seeded_reset_replays(self):
        env = SoftSplitEnv(small_cfg(seed=9))
        first = env.high_obs()
        run_steps(env, 5)
        again = env.reset()
        assert again == first
        # full trajectory replay as well
        a = [o.objective for o in run_steps(env, 5)]
        env.reset()
        b = [o.objective for o in run_steps(env, 5)]
        assert a == b

    def test_empty_network(self):
        env = SoftSplitEnv(small_cfg(n_users=0))
        obs = env.high_obs()
        assert obs.n_transitional == 0
        assert obs.mean_load_transitional == 0.0
        assert obs.d_min_ms == 12.0


class TestTurnProtocol:
    def test_invalid_high_action(self):
        env = SoftSplitEnv(small_cfg())
        with pytest.raises(ActionError):
            env.step_high(5)
        with pytest.raises(ActionError):
            env.step_high(0)

    def test_double_high_call(self):
        env = SoftSplitEnv(small_cfg())
        env.step_high(3)
        with pytest.raises(ProtocolError):
            env.step_high(3)

    def test_low_before_high(self):
        env = SoftSplitEnv(small_cfg())
        with pytest.raises(ProtocolError):
            env.step_low([3, 3])

    def test_invalid_low_actions(self):
        env = SoftSplitEnv(small_cfg())
        env.step_high(3)
        with pytest.raises(ActionError):
            env.step_low([3])
        with pytest.raises(ActionError):
            env.step_low([3, 8])

    def test_a_cc_echoed_in_low_obs(self):
        env = SoftSplitEnv(small_cfg())
        for a in (1, 2, 3, 4):
            low = env.step_high(a)
            assert all(o.a_cc == a for o in low)
            env.step_low([3, 3])

    def test_done_then_error(self):
        env = SoftSplitEnv(small_cfg(episode_len=2))
        outs = run_steps(env, 2)
        assert [o.done for o in outs] == [False, True]
        with pytest.raises(ProtocolError):
            env.step_high(3)
        with pytest.raises(ProtocolError):
            env.step_low([3, 3])


class TestRewards:
    def test_low_reward_formula(self):
        # 4 users, 3 meet the delay budget, 1 dropped, penalty 0.1
        assert compute_reward_low(3, 4, 1, 0.1) == pytest.approx(0.65)

    def test_low_reward_empty_ec(self):
        assert compute_reward_low(0, 0, 0, 0.1) == 0.0

    def test_low_reward_all_met(self):
        assert compute_reward_low(4, 4, 0, 0.1) == 1.0

    def test_high_reward_sum(self):
        assert compute_reward_high(1.0, [0.65, 0.65]) == pytest.approx(2.3)
        assert compute_reward_high(0.0, []) == 0.0

    def test_high_reward_identity_on_random_episodes(self):
        rng = np.random.default_rng(0)
        for seed in range(10):
            env = SoftSplitEnv(small_cfg(seed=seed, episode_len=12))
            done = False
            while not done:
                env.step_high(int(rng.integers(1, 5)))
                out = env.step_low(rng.integers(1, 8, size=2))
                assert out.high_reward == pytest.approx(
                    out.r_t + sum(out.low_rewards.values()), abs=1e-12
                )
                done = out.done


class TestDropsAndFeasibility:
    def test_no_drop_when_within_budget(self):
        env = SoftSplitEnv(small_cfg())
        (out,) = run_steps(env, 1)
        assert out.dropped == []
        assert not any(out.gops_violation.values())

    def test_exact_drop_count_from_overshoot(self):
        # single EC, per-user compute 12, budget exceeded by 20 -> 2 drops
        table = make_table(cell=0.0, user=12.0, mid=1.0, pe=0.5, pc=0.5, tx=1.0)
        cfg = EnvConfig(
            n_users=10,
            n_ecs=1,
            aps_per_ec=2,
            area=(200.0, 100.0),
            episode_len=5,
            g_th=100.0,  # demand 120
            m_th=1e9,
            table=table,
            seed=1,
        )
        env = SoftSplitEnv(cfg)
        env.step_high(3)
        out = env.step_low([3])
        assert any(out.gops_violation.values())
        assert len(out.dropped) == 2
        assert out.gops_after[0] == pytest.approx(96.0)

    def test_seeded_drops_replay(self):
        table = make_table(cell=0.0, user=12.0, mid=1.0, pe=0.5, pc=0.5, tx=1.0)
        cfg = dict(
            n_users=10, n_ecs=1, aps_per_ec=2, area=(200.0, 100.0),
            episode_len=5, g_th=100.0, m_th=1e9, table=table, seed=4,
        )
        a = SoftSplitEnv(EnvConfig(**cfg))
        b = SoftSplitEnv(EnvConfig(**cfg))
        outs_a = run_steps(a, 5)
        outs_b = run_steps(b, 5)
        assert [o.dropped for o in outs_a] == [o.dropped for o in outs_b]

    def test_midhaul_violation_tears_down(self):
        # midhaul cannot be relieved by dropping users; everyone goes
        env = SoftSplitEnv(small_cfg(m_th=10.0, episode_len=3))
        env.step_high(1)
        out = env.step_low([1, 1])
        assert out.midhaul_violation
        assert len(out.dropped) == 12
        assert out.midhaul_after == 0.0

    def test_post_drop_feasibility_random_episodes(self):
        rng = np.random.default_rng(5)
        for seed in range(6):
            env = SoftSplitEnv(small_cfg(seed=seed, episode_len=15, g_th=2000.0))
            done = False
            while not done:
                env.step_high(int(rng.integers(1, 5)))
                out = env.step_low(rng.integers(1, 8, size=2))
                for e, g in out.gops_after.items():
                    assert g <= env.cfg.g_th + 1e-9
                assert out.midhaul_after <= env.cfg.m_th + 1e-9
                done = out.done

    def test_violation_flags_reflect_pre_drop_state(self):
        table = make_table(cell=0.0, user=12.0, mid=1.0, pe=0.5, pc=0.5, tx=1.0)
        cfg = EnvConfig(
            n_users=10, n_ecs=1, aps_per_ec=2, area=(200.0, 100.0),
            episode_len=5, g_th=100.0, m_th=1e9, table=table, seed=1,
        )
        env = SoftSplitEnv(cfg)
        env.step_high(2)
        out = env.step_low([2])
        # flags set even though the post-drop state is feasible again
        assert out.gops_violation[0] is True
        assert out.gops_after[0] <= 100.0
        assert out.ledger.gops_total[0] == pytest.approx(120.0)


class TestAccounting:
    def test_status_conservation_each_step(self):
        rng = np.random.default_rng(1)
        env = SoftSplitEnv(small_cfg(episode_len=15, g_th=2000.0, seed=3))
        done = False
        while not done:
            env.step_high(int(rng.integers(1, 5)))
            out = env.step_low(rng.integers(1, 8, size=2))
            n_drop = len(out.dropped)
            n_disc = len(out.disconnected)
            assert n_drop + n_disc + out.n_connected == env.cfg.n_users
            done = out.done

    def test_dropped_user_reenters_next_step(self):
        table = make_table(cell=0.0, user=12.0, mid=1.0, pe=0.5, pc=0.5, tx=1.0)
        cfg = EnvConfig(
            n_users=10, n_ecs=1, aps_per_ec=2, area=(200.0, 100.0),
            episode_len=5, g_th=100.0, m_th=1e9, table=table, seed=1,
        )
        env = SoftSplitEnv(cfg)
        env.step_high(3)
        out = env.step_low([3])
        assert out.dropped
        # with healthy SINR everywhere, dropped users reconnect for the next step
        assert all(u.connected for u in env.users)

    def test_full_determinism_under_seed(self):
        cfg = dict(seed=11, episode_len=20, g_th=2500.0)
        a = SoftSplitEnv(small_cfg(**cfg))
        b = SoftSplitEnv(small_cfg(**cfg))
        for _ in range(20):
            oa = a.step_high(4), a.step_low([4, 2])
            ob = b.step_high(4), b.step_low([4, 2])
            assert oa[0] == ob[0]
            assert oa[1].objective == ob[1].objective
            assert oa[1].dropped == ob[1].dropped
            assert oa[1].low_rewards == ob[1].low_rewards

    def test_ledger_by_group_sums(self):
        env = SoftSplitEnv(small_cfg())
        env.step_high(3)
        out = env.step_low([3, 4])
        led = out.ledger
        for e, total in led.gops_total.items():
            assert total == pytest.approx(sum(led.gops_by_group[e].values()))
        assert led.midhaul_total == pytest.approx(
            sum(sum(m.values()) for m in led.midhaul_by_group.values())
        )


class TestDisconnection:
    def test_low_sinr_disconnects_users(self):
        # noise floor so high that every user loses its link
        from softsplit.scenario import SinrParams

        cfg = small_cfg(
            episode_len=4,
            sinr=SinrParams(pl0_db=40.0, pathloss_exp=3.5, noise_dbm=60.0, sinr_threshold_db=-6.0),
        )
        env = SoftSplitEnv(cfg)
        run_steps(env, 2)
        out = run_steps(env, 1)[0]
        # after the first advance everyone is flagged and marked disconnected
        assert len(out.disconnected) == cfg.n_users
        assert out.n_connected == 0

    def test_outage_counted_for_disconnected(self):
        from softsplit.scenario import SinrParams

        cfg = small_cfg(
            episode_len=4,
            sinr=SinrParams(pl0_db=40.0, pathloss_exp=3.5, noise_dbm=60.0, sinr_threshold_db=-6.0),
        )
        env = SoftSplitEnv(cfg)
        run_steps(env, 3)
        for u in env.users:
            assert env.windows[u.id].outage_count >= 2
