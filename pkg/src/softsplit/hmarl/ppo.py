"""Clipped-surrogate PPO with hand-derived gradients and a hand-rolled Adam.

The loss (minimized) is

    -mean(min(ratio*A, clip(ratio, 1-eps, 1+eps)*A))
    - entropy_coef * mean(H(pi(obs)))
    + value_coef * mean((V(obs) - return)^2)

Gradients flow through the softmax head, the value head and the shared tanh
trunk via `backward_policy`; a finite-difference oracle in the test suite
checks every parameter of every term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError, TrainingError
from .policy import PolicyParams, backward_policy, forward_policy

ADV_NORM_EPS = 1e-8


@dataclass
class PPOConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    lr: float = 3e-4
    epochs: int = 4
    minibatch: int = 64

    def __post_init__(self) -> None:
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigError("clip_eps must lie in (0, 1)")
        if not 0.0 <= self.gamma <= 1.0 or not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigError("gamma and gae_lambda must lie in [0, 1]")


@dataclass
class Trajectory:
    """One agent's experience, in step order."""

    obs: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    values: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    dones: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rewards)

    def add(self, obs, action, log_prob, value, reward, done) -> None:
        self.obs.append(np.asarray(obs, dtype=np.float64))
        self.actions.append(int(action))
        self.log_probs.append(float(log_prob))
        self.values.append(float(value))
        self.rewards.append(float(reward))
        self.dones.append(bool(done))


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    log_probs_old: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


def compute_gae(traj: Trajectory, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and the matching value targets.

    Episodes end at done flags; the terminal bootstrap value is zero.
    """
    n = len(traj)
    rewards = np.asarray(traj.rewards, dtype=np.float64)
    values = np.asarray(traj.values, dtype=np.float64)
    dones = np.asarray(traj.dones, dtype=bool)
    adv = np.zeros(n, dtype=np.float64)
    gae = 0.0
    for t in range(n - 1, -1, -1):
        next_value = 0.0 if dones[t] or t == n - 1 else values[t + 1]
        cont = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value - values[t]
        gae = delta + gamma * lam * cont * gae
        adv[t] = gae
    return adv, adv + values


def batch_from_trajectories(
    trajs: list[Trajectory], cfg: PPOConfig, normalize: bool = True
) -> Batch:
    obs, actions, logp, advs, rets = [], [], [], [], []
    for traj in trajs:
        if len(traj) == 0:
            continue
        a, r = compute_gae(traj, cfg.gamma, cfg.gae_lambda)
        obs.append(np.stack(traj.obs))
        actions.append(np.asarray(traj.actions))
        logp.append(np.asarray(traj.log_probs))
        advs.append(a)
        rets.append(r)
    if not obs:
        raise ConfigError("no experience collected")
    advantages = np.concatenate(advs)
    if normalize:
        advantages = (advantages - advantages.mean()) / (advantages.std() + ADV_NORM_EPS)
    return Batch(
        obs=np.concatenate(obs),
        actions=np.concatenate(actions),
        log_probs_old=np.concatenate(logp),
        advantages=advantages,
        returns=np.concatenate(rets),
    )


def clipped_surrogate(ratio: float, advantage: float, clip_eps: float) -> float:
    """Per-sample surrogate term min(ratio*A, clip(ratio)*A)."""
    clipped = min(max(ratio, 1.0 - clip_eps), 1.0 + clip_eps)
    return min(ratio * advantage, clipped * advantage)


def ppo_loss(params: PolicyParams, batch: Batch, cfg: PPOConfig) -> float:
    """Scalar training loss over a batch (for the finite-difference oracle)."""
    probs, values, _ = forward_policy(params, batch.obs)
    n = batch.obs.shape[0]
    idx = np.arange(n)
    logp_new = np.log(probs[idx, batch.actions])
    ratio = np.exp(logp_new - batch.log_probs_old)
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    surrogate = np.minimum(ratio * batch.advantages, clipped * batch.advantages)
    entropy = -(probs * np.log(probs + 1e-30)).sum(axis=1)
    value_err = values - batch.returns
    return float(
        -surrogate.mean()
        - cfg.entropy_coef * entropy.mean()
        + cfg.value_coef * (value_err * value_err).mean()
    )


def ppo_gradients(
    params: PolicyParams, batch: Batch, cfg: PPOConfig
) -> tuple[PolicyParams, dict[str, float]]:
    """Analytic gradient of `ppo_loss` w.r.t. every parameter array."""
    probs, values, cache = forward_policy(params, batch.obs)
    n = batch.obs.shape[0]
    idx = np.arange(n)
    p_a = probs[idx, batch.actions]
    logp_new = np.log(p_a)
    ratio = np.exp(logp_new - batch.log_probs_old)
    adv = batch.advantages

    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    surrogate = np.minimum(ratio * adv, clipped * adv)
    # Gradient flows only where the unclipped branch attains the min.
    flow = ratio * adv <= clipped * adv

    one_hot = np.zeros_like(probs)
    one_hot[idx, batch.actions] = 1.0
    dlogp = one_hot - probs  # d log pi(a|s) / d logits

    # policy term: -(1/n) sum flow * ratio * A * dlogp
    dlogits = -(flow * ratio * adv)[:, None] * dlogp / n

    # entropy bonus: -coef * (1/n) sum H; dH/dlogits_k = -p_k (log p_k + H)
    logp_full = np.log(probs + 1e-30)
    entropy = -(probs * logp_full).sum(axis=1)
    d_entropy = -probs * (logp_full + entropy[:, None])
    dlogits -= cfg.entropy_coef * d_entropy / n

    # value term: coef * (1/n) sum (v - R)^2
    value_err = values - batch.returns
    dvalues = 2.0 * cfg.value_coef * value_err / n

    grads = backward_policy(params, cache, dlogits, dvalues)
    stats = {
        "loss": float(
            -surrogate.mean()
            - cfg.entropy_coef * entropy.mean()
            + cfg.value_coef * (value_err * value_err).mean()
        ),
        "policy_loss": float(-surrogate.mean()),
        "entropy": float(entropy.mean()),
        "value_loss": float((value_err * value_err).mean()),
        "clip_fraction": float(np.mean(~flow)),
    }
    return grads, stats


class AdamState:
    """Per-parameter-set Adam moments."""

    def __init__(self, params: PolicyParams, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, params: PolicyParams, grads: PolicyParams, lr: float) -> PolicyParams:
        self.t += 1
        new_arrays = []
        for i, (p, g) in enumerate(zip(params.arrays(), grads.arrays())):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / (1.0 - self.beta1**self.t)
            v_hat = self.v[i] / (1.0 - self.beta2**self.t)
            new_arrays.append(p - lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return PolicyParams(*new_arrays)


def ppo_update(
    params: PolicyParams,
    trajectories: list[Trajectory],
    cfg: PPOConfig,
    rng: np.random.Generator,
    adam: Optional[AdamState] = None,
) -> tuple[PolicyParams, dict[str, float]]:
    """Several epochs of minibatched clipped-surrogate ascent over the batch."""
    batch = batch_from_trajectories(trajectories, cfg)
    adam = adam or AdamState(params)
    n = batch.obs.shape[0]
    stats: dict[str, float] = {}
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            sel = order[start : start + cfg.minibatch]
            mini = Batch(
                obs=batch.obs[sel],
                actions=batch.actions[sel],
                log_probs_old=batch.log_probs_old[sel],
                advantages=batch.advantages[sel],
                returns=batch.returns[sel],
            )
            grads, stats = ppo_gradients(params, mini, cfg)
            if not np.isfinite(stats["loss"]):
                raise TrainingError(f"non-finite loss: {stats}")
            params = adam.step(params, grads, cfg.lr)
            if not params.check_finite():
                raise TrainingError("parameters diverged to non-finite values")
    return params, stats
