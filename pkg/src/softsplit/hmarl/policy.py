"""Small stochastic policy networks with value heads, written on plain numpy.

Two tanh hidden layers feed a softmax action head and a scalar value head.
Forward passes return the cache needed for hand-derived backpropagation; no
autodiff framework is involved anywhere in training.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, fields
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, SchemaError

CHECKPOINT_VERSION = 1

PARAM_NAMES = ("w1", "b1", "w2", "b2", "wa", "ba", "wv", "bv")


@dataclass
class PolicyParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    wa: np.ndarray  # action head
    ba: np.ndarray
    wv: np.ndarray  # value head
    bv: np.ndarray

    @classmethod
    def init(
        cls,
        obs_dim: int,
        n_actions: int,
        hidden: tuple[int, int] = (64, 64),
        rng: Optional[np.random.Generator] = None,
    ) -> "PolicyParams":
        rng = rng or np.random.default_rng(0)
        h1, h2 = hidden

        def layer(n_out, n_in):
            return rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_out, n_in))

        return cls(
            w1=layer(h1, obs_dim),
            b1=np.zeros(h1),
            w2=layer(h2, h1),
            b2=np.zeros(h2),
            wa=0.01 * layer(n_actions, h2),  # near-uniform initial policy
            ba=np.zeros(n_actions),
            wv=layer(1, h2),
            bv=np.zeros(1),
        )

    @property
    def obs_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def n_actions(self) -> int:
        return self.wa.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in PARAM_NAMES]

    def copy(self) -> "PolicyParams":
        return PolicyParams(*[a.copy() for a in self.arrays()])

    def check_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass
class ForwardCache:
    obs: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    probs: np.ndarray
    values: np.ndarray


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward_policy(params: PolicyParams, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray, ForwardCache]:
    """Batched forward pass: (action probabilities, values, cache).

    `obs` is (N, obs_dim); a single observation may be passed as a 1-D array.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    if obs.shape[1] != params.obs_dim:
        raise ConfigError(f"observation dim {obs.shape[1]} != parameter dim {params.obs_dim}")
    h1 = np.tanh(obs @ params.w1.T + params.b1)
    h2 = np.tanh(h1 @ params.w2.T + params.b2)
    logits = h2 @ params.wa.T + params.ba
    probs = softmax(logits)
    values = (h2 @ params.wv.T + params.bv)[:, 0]
    return probs, values, ForwardCache(obs=obs, h1=h1, h2=h2, probs=probs, values=values)


def backward_policy(
    params: PolicyParams,
    cache: ForwardCache,
    dlogits: np.ndarray,
    dvalues: np.ndarray,
) -> PolicyParams:
    """Backpropagate loss gradients w.r.t. logits and values into parameters."""
    h1, h2, obs = cache.h1, cache.h2, cache.obs
    dwa = dlogits.T @ h2
    dba = dlogits.sum(axis=0)
    dwv = dvalues[None, :] @ h2
    dbv = np.array([dvalues.sum()])
    dh2 = dlogits @ params.wa + np.outer(dvalues, params.wv[0])
    dz2 = dh2 * (1.0 - h2 * h2)
    dw2 = dz2.T @ h1
    db2 = dz2.sum(axis=0)
    dh1 = dz2 @ params.w2
    dz1 = dh1 * (1.0 - h1 * h1)
    dw1 = dz1.T @ obs
    db1 = dz1.sum(axis=0)
    return PolicyParams(w1=dw1, b1=db1, w2=dw2, b2=db2, wa=dwa, ba=dba, wv=dwv, bv=dbv)


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> tuple[int, float]:
    """Categorical draw; returns (action index, log probability)."""
    probs = np.asarray(probs, dtype=np.float64).ravel()
    u = rng.random()
    action = int(np.searchsorted(np.cumsum(probs), u))
    action = min(action, probs.size - 1)  # guard the u ~= 1.0 edge
    return action, float(np.log(probs[action]))


def act_greedy(params: PolicyParams, obs: np.ndarray) -> int:
    """Most likely action; ties resolve to the lowest index."""
    probs, _, _ = forward_policy(params, obs)
    return int(np.argmax(probs[0]))


def aggregate_shared_policy(param_sets: Sequence[PolicyParams]) -> PolicyParams:
    """Element-wise mean of parameter sets (the CC's parameter-server step)."""
    if not param_sets:
        raise ConfigError("nothing to aggregate")
    ref_shapes = [a.shape for a in param_sets[0].arrays()]
    for p in param_sets[1:]:
        if [a.shape for a in p.arrays()] != ref_shapes:
            raise ConfigError("parameter sets have mismatched shapes")
    stacked = zip(*[p.arrays() for p in param_sets])
    return PolicyParams(*[np.mean(group, axis=0) for group in stacked])


def save_checkpoint(
    path,
    high: PolicyParams,
    low: PolicyParams,
    meta: Optional[dict] = None,
) -> None:
    """Write both policies to one binary file (npz container, any extension)."""
    payload = {f"high_{n}": a for n, a in zip(PARAM_NAMES, high.arrays())}
    payload.update({f"low_{n}": a for n, a in zip(PARAM_NAMES, low.arrays())})
    payload["version"] = np.array([CHECKPOINT_VERSION])
    payload["meta"] = np.frombuffer(json.dumps(meta or {}).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **payload)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path) -> tuple[PolicyParams, PolicyParams, dict]:
    with np.load(path) as data:
        version = int(data["version"][0])
        if version != CHECKPOINT_VERSION:
            raise SchemaError(f"checkpoint version {version} unsupported")
        high = PolicyParams(*[data[f"high_{n}"] for n in PARAM_NAMES])
        low = PolicyParams(*[data[f"low_{n}"] for n in PARAM_NAMES])
        meta = json.loads(bytes(data["meta"]).decode() or "{}")
    return high, low, meta
