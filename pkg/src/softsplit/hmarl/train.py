"""Turn-based hierarchical training: one CC policy, one shared EC policy.

Every timestep the CC agent acts first (it picks the network-wide split for
transitional users), then each EC agent reacts with a split for its own
non-transitional users using the shared low-level parameters. Rewards are
individual: each EC trajectory is credited with its own reward, the CC
trajectory with the transitional continuity ratio plus the sum of EC rewards.
After each iteration every EC updates its own copy of the shared policy from
its own trajectories and the CC aggregates the copies by element-wise mean,
playing the role of a parameter server.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..env import EnvConfig, SoftSplitEnv
from ..errors import TrainingError
from ..optimizer import Policy
from ..split_model import FS_MAX, MC_CAPABLE_MAX
from .policy import (
    PolicyParams,
    act_greedy,
    aggregate_shared_policy,
    forward_policy,
    sample_action,
    save_checkpoint,
)
from .ppo import AdamState, PPOConfig, Trajectory, ppo_update

log = logging.getLogger(__name__)

HIGH_OBS_DIM = 3
LOW_OBS_DIM = 7
HIGH_ACTIONS = MC_CAPABLE_MAX  # splits 1..4
LOW_ACTIONS = FS_MAX  # splits 1..7


@dataclass
class ObsScales:
    """Per-field divisors applied to observations before they reach policies."""

    high: np.ndarray
    low: np.ndarray

    @classmethod
    def from_env_config(cls, cfg: EnvConfig) -> "ObsScales":
        n = max(cfg.n_users, 1)
        d = cfg.service.delay_threshold_ms
        return cls(
            high=np.array([n, d, n], dtype=np.float64),
            low=np.array(
                [n, d, n, cfg.g_th, cfg.m_th, cfg.m_th, MC_CAPABLE_MAX], dtype=np.float64
            ),
        )


@dataclass
class TrainConfig:
    iters: int = 200
    episodes_per_iter: int = 1
    hidden: tuple[int, int] = (64, 64)
    seed: int = 0
    checkpoint_every: Optional[int] = None


@dataclass
class TrainResult:
    high: PolicyParams
    low: PolicyParams
    curves: list[dict] = field(default_factory=list)


def rollout_episode(
    env: SoftSplitEnv,
    high: PolicyParams,
    low: PolicyParams,
    scales: ObsScales,
    rng: np.random.Generator,
) -> tuple[Trajectory, dict[int, Trajectory]]:
    """Collect one episode with sampled actions, turn by turn."""
    high_traj = Trajectory()
    low_trajs: dict[int, Trajectory] = {e: Trajectory() for e in env.ec_order}
    hobs = env.high_obs()
    done = False
    while not done:
        hvec = hobs.as_array() / scales.high
        hprobs, hval, _ = forward_policy(high, hvec)
        a_high, logp_high = sample_action(hprobs[0], rng)
        low_obs = env.step_high(a_high + 1)

        lvecs, acts, logps, vals = [], [], [], []
        for lobs in low_obs:
            lvec = lobs.as_array() / scales.low
            lprobs, lval, _ = forward_policy(low, lvec)
            a, logp = sample_action(lprobs[0], rng)
            lvecs.append(lvec)
            acts.append(a)
            logps.append(logp)
            vals.append(float(lval[0]))
        outcome = env.step_low([a + 1 for a in acts])

        done = outcome.done
        high_traj.add(hvec, a_high, logp_high, float(hval[0]), outcome.high_reward, done)
        for e, lvec, a, logp, val in zip(env.ec_order, lvecs, acts, logps, vals):
            low_trajs[e].add(lvec, a, logp, val, outcome.low_rewards[e], done)
        if not done:
            hobs = env.high_obs()
    return high_traj, low_trajs


def train(
    env_factory: Callable[[int], SoftSplitEnv],
    high_cfg: PPOConfig,
    low_cfg: PPOConfig,
    train_cfg: TrainConfig,
    scales: Optional[ObsScales] = None,
    out_dir: Optional[str] = None,
    progress: Optional[Callable[[dict], None]] = None,
) -> TrainResult:
    """Alternate turn-based rollouts with PPO updates and weight aggregation."""
    master = np.random.SeedSequence(train_cfg.seed)
    init_seq, sample_seq, update_seq, episode_seq = master.spawn(4)
    rng_init = np.random.Generator(np.random.PCG64(init_seq))
    rng_sample = np.random.Generator(np.random.PCG64(sample_seq))
    rng_update = np.random.Generator(np.random.PCG64(update_seq))
    episode_seeds = episode_seq.generate_state(train_cfg.iters * train_cfg.episodes_per_iter)

    high = PolicyParams.init(HIGH_OBS_DIM, HIGH_ACTIONS, train_cfg.hidden, rng_init)
    low = PolicyParams.init(LOW_OBS_DIM, LOW_ACTIONS, train_cfg.hidden, rng_init)
    high_adam = AdamState(high)
    low_adams: dict[int, AdamState] = {}

    curves: list[dict] = []
    ep = 0
    for it in range(train_cfg.iters):
        high_trajs: list[Trajectory] = []
        low_trajs: dict[int, list[Trajectory]] = {}
        ep_returns = []
        step_re = []
        if scales is None:
            scales = ObsScales.from_env_config(env_factory(0).cfg)
        for _ in range(train_cfg.episodes_per_iter):
            env = env_factory(int(episode_seeds[ep]))
            ep += 1
            htraj, ltrajs = rollout_episode(env, high, low, scales, rng_sample)
            high_trajs.append(htraj)
            for e, traj in ltrajs.items():
                low_trajs.setdefault(e, []).append(traj)
                step_re.extend(traj.rewards)
            ep_returns.append(sum(htraj.rewards))

        try:
            high, hstats = ppo_update(high, high_trajs, high_cfg, rng_update, high_adam)
            updated = []
            lstats = {}
            for e in sorted(low_trajs):
                adam = low_adams.setdefault(e, AdamState(low))
                params_e, lstats = ppo_update(low, low_trajs[e], low_cfg, rng_update, adam)
                updated.append(params_e)
            low = aggregate_shared_policy(updated)
        except TrainingError:
            if out_dir:
                save_checkpoint(
                    os.path.join(out_dir, "checkpoint_abort.bin"),
                    high,
                    low,
                    {"iteration": it, "aborted": True},
                )
            raise

        row = {
            "iteration": it,
            "episode_return_high": float(np.mean(ep_returns)),
            "mean_step_reward_low": float(np.mean(step_re)) if step_re else 0.0,
            "high_loss": hstats["loss"],
            "high_entropy": hstats["entropy"],
            "low_loss": lstats.get("loss", float("nan")),
            "low_entropy": lstats.get("entropy", float("nan")),
        }
        curves.append(row)
        if progress:
            progress(row)
        if log.isEnabledFor(logging.DEBUG):
            log.debug("iter %d: %s", it, row)
        if out_dir and train_cfg.checkpoint_every and (it + 1) % train_cfg.checkpoint_every == 0:
            save_checkpoint(
                os.path.join(out_dir, f"checkpoint_{it + 1}.bin"), high, low, {"iteration": it + 1}
            )

    return TrainResult(high=high, low=low, curves=curves)


class LearnedPolicy(Policy):
    """Wraps trained parameters for evaluation; greedy by default."""

    def __init__(
        self,
        high: PolicyParams,
        low: PolicyParams,
        scales: ObsScales,
        greedy: bool = True,
        seed: int = 0,
    ):
        self.high = high
        self.low = low
        self.scales = scales
        self.greedy = greedy
        self.rng = np.random.Generator(np.random.PCG64(seed))

    def act_high(self, env: SoftSplitEnv, obs) -> int:
        vec = obs.as_array() / self.scales.high
        if self.greedy:
            return act_greedy(self.high, vec) + 1
        probs, _, _ = forward_policy(self.high, vec)
        a, _ = sample_action(probs[0], self.rng)
        return a + 1

    def act_low(self, env: SoftSplitEnv, low_obs) -> list[int]:
        actions = []
        for lobs in low_obs:
            vec = lobs.as_array() / self.scales.low
            if self.greedy:
                actions.append(act_greedy(self.low, vec) + 1)
            else:
                probs, _, _ = forward_policy(self.low, vec)
                a, _ = sample_action(probs[0], self.rng)
                actions.append(a + 1)
        return actions
