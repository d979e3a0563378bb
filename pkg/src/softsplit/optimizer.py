"""Baseline decision policies: static splits, random, and brute-force optimal.

The brute-force solver enumerates every (transitional, per-EC) split
combination at the current timestep, replays each one against the frozen
environment state under a fixed evaluation drop seed, and commits the
argmax. Ties go to the lexicographically smallest assignment.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .env import SoftSplitEnv
from .errors import ConfigError
from .split_model import FS_MAX, FS_MIN, FSOption, GroupAssignment, MC_CAPABLE_MAX

log = logging.getLogger(__name__)

OBJECTIVE_CONTINUITY = "continuity"
OBJECTIVE_REWARD_SUM = "reward_sum"


def enumerate_configs(n_ecs: int, ec_ids: Optional[Sequence[int]] = None) -> list[GroupAssignment]:
    """All assignments, lexicographic: transitional split 1..4 x per-EC splits 1..7."""
    if n_ecs < 1:
        raise ConfigError("need at least one EC")
    ids = list(ec_ids) if ec_ids is not None else list(range(n_ecs))
    if len(ids) != n_ecs:
        raise ConfigError("ec_ids length must match n_ecs")
    out = []
    ranges = [range(FS_MIN, MC_CAPABLE_MAX + 1)] + [range(FS_MIN, FS_MAX + 1)] * n_ecs
    for combo in itertools.product(*ranges):
        fs_t = FSOption(combo[0])
        fs_nt = {e: FSOption(f) for e, f in zip(ids, combo[1:])}
        out.append(GroupAssignment(fs_transitional=fs_t, fs_non_transitional=fs_nt))
    return out


def brute_force_optimal(
    env: SoftSplitEnv,
    eval_seed: int = 0,
    objective: str = OBJECTIVE_CONTINUITY,
) -> GroupAssignment:
    """Argmax assignment for the environment's current timestep.

    Candidates are scored on the weighted continuity objective by default;
    `objective="reward_sum"` switches to the agents' summed rewards instead.
    """
    if objective not in (OBJECTIVE_CONTINUITY, OBJECTIVE_REWARD_SUM):
        raise ConfigError(f"unknown objective {objective!r}")
    assignments = enumerate_configs(len(env.ec_order), env.ec_order)
    candidates = [
        (a.fs_transitional.index, {e: f.index for e, f in a.fs_non_transitional.items()})
        for a in assignments
    ]
    results = env.preview_assignments(candidates, drop_seed=eval_seed)
    best_i = 0
    best_score = None
    for i, res in enumerate(results):
        score = res.objective if objective == OBJECTIVE_CONTINUITY else res.r_cc
        if best_score is None or score > best_score:
            best_score = score
            best_i = i
    return assignments[best_i]


class Policy:
    """Produces one transitional split per step and one split per EC."""

    def act_high(self, env: SoftSplitEnv, obs) -> int:
        raise NotImplementedError

    def act_low(self, env: SoftSplitEnv, low_obs) -> list[int]:
        raise NotImplementedError


class StaticPolicy(Policy):
    """Deploy one fixed split for both groups everywhere."""

    def __init__(self, fs: int):
        if not FS_MIN <= fs <= FS_MAX:
            raise ConfigError(f"static split {fs} outside {FS_MIN}..{FS_MAX}")
        self.fs = fs
        if fs > MC_CAPABLE_MAX:
            log.info(
                "static split %d is not MC-capable; transitional split clamped to %d",
                fs,
                MC_CAPABLE_MAX,
            )

    def act_high(self, env: SoftSplitEnv, obs) -> int:
        return min(self.fs, MC_CAPABLE_MAX)

    def act_low(self, env: SoftSplitEnv, low_obs) -> list[int]:
        return [self.fs] * len(low_obs)


class RandomPolicy(Policy):
    def __init__(self, seed: int = 0):
        self.rng = np.random.Generator(np.random.PCG64(seed))

    def act_high(self, env: SoftSplitEnv, obs) -> int:
        return int(self.rng.integers(FS_MIN, MC_CAPABLE_MAX + 1))

    def act_low(self, env: SoftSplitEnv, low_obs) -> list[int]:
        return [int(self.rng.integers(FS_MIN, FS_MAX + 1)) for _ in low_obs]


class BruteForceOptimalPolicy(Policy):
    """Per-timestep exhaustive search; myopic, no lookahead."""

    def __init__(self, eval_seed: int = 0, objective: str = OBJECTIVE_CONTINUITY):
        self.eval_seed = eval_seed
        self.objective = objective
        self._pending: Optional[GroupAssignment] = None

    def act_high(self, env: SoftSplitEnv, obs) -> int:
        self._pending = brute_force_optimal(env, self.eval_seed, self.objective)
        return self._pending.fs_transitional.index

    def act_low(self, env: SoftSplitEnv, low_obs) -> list[int]:
        if self._pending is None:
            raise ConfigError("low turn before high turn; no assignment chosen")
        fs_nt = self._pending.fs_non_transitional
        return [fs_nt[e].index for e in env.ec_order]
