"""Experiment configuration: one JSON file drives a full run.

Every section is optional and falls back to the desk-scale defaults (50
users, 2 ECs, 300 timesteps, 12 ms delay budget, 1e-5 outage budget, 16
kGOPS per EC, 30k midhaul units per EC). Parsing is strict: unknown keys are
rejected by name so silent typos cannot change an experiment.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .env import EnvConfig
from .errors import SchemaError
from .hmarl.ppo import PPOConfig
from .hmarl.train import ObsScales, TrainConfig
from .qos import DelayParams, ServiceSpec
from .scenario import SinrParams
from .split_model import DEFAULT_FS_TABLE, FSConfigTable

DEFAULTS: dict[str, Any] = {
    "env": {
        "n_users": 50,
        "n_ecs": 2,
        "aps_per_ec": 4,
        "area": [1000.0, 500.0],
        "episode_len": 300,
        "dt": 1.0,
        "v_min": 10.0,
        "v_max": 30.0,
        "k_min": 2,
        "tx_power_dbm": 30.0,
        "g_th": 16000.0,
        "m_th": None,  # 30000 per EC
        "seed": 0,
        "initial_fs": [3, 3],
        "share_cell_pfs": False,
    },
    "sinr": {
        "pl0_db": 40.0,
        "d0_m": 1.0,
        "pathloss_exp": 3.5,
        "noise_dbm": -90.0,
        "interference_dbm": 0.0,
        "sinr_threshold_db": -6.0,
    },
    "service": {"delay_threshold_ms": 12.0, "outage_threshold": 1e-5},
    "delay": {
        "route_factor_transitional": 1.5,
        "load_lambda": 2.0,
        "load_threshold": 0.8,
        "hw_overhead_ms": 1.0,
        "window": 50,
    },
    "weights": {"w_nt": 0.5, "w_t": 0.5, "drop_penalty": 0.1},
    "fs_table": DEFAULT_FS_TABLE,
    "obs_scales": {"high": None, "low": None},  # derived from env when None
    "ppo": {
        "high": {
            "gamma": 0.99,
            "gae_lambda": 0.95,
            "clip_eps": 0.2,
            "entropy_coef": 0.01,
            "value_coef": 0.5,
            "lr": 3e-4,
            "epochs": 4,
            "minibatch": 64,
        },
        "low": {
            "gamma": 0.80,
            "gae_lambda": 0.95,
            "clip_eps": 0.2,
            "entropy_coef": 0.01,
            "value_coef": 0.5,
            "lr": 3e-4,
            "epochs": 4,
            "minibatch": 64,
        },
    },
    "train": {"iters": 200, "episodes_per_iter": 1, "hidden": [64, 64], "seed": 0},
    "run": {
        "policy": "static:3",
        "episodes": 50,
        "seeds": [0, 1, 2, 3, 4],
        "out_dir": "out",
        "eval_greedy": True,
        "objective": "continuity",
        "eval_drop_seed": 910,
        "checkpoint": None,
    },
    "sweep": {"axis": "g_th", "values": [14000.0, 15000.0, 16000.0, 17000.0, 18000.0]},
}


def _merge(defaults: Any, override: Any, path: str) -> Any:
    if isinstance(defaults, dict):
        if not isinstance(override, dict):
            raise SchemaError(f"{path or 'config'}: expected an object")
        # fs_table rows are keyed by split index, not by a fixed vocabulary
        if path == "fs_table":
            return override
        unknown = set(override) - set(defaults)
        if unknown:
            raise SchemaError(f"{path or 'config'}: unknown keys {sorted(unknown)}")
        merged = {}
        for key, dval in defaults.items():
            sub = f"{path}.{key}" if path else key
            merged[key] = _merge(dval, override[key], sub) if key in override else dval
        return merged
    return override


@dataclass
class ExperimentConfig:
    env: EnvConfig
    table: FSConfigTable
    obs_scales: ObsScales
    ppo_high: PPOConfig
    ppo_low: PPOConfig
    train: TrainConfig
    policy: str
    episodes: int
    seeds: list[int]
    out_dir: str
    eval_greedy: bool
    objective: str
    eval_drop_seed: int
    checkpoint: Optional[str]
    sweep_axis: str
    sweep_values: list[float]
    raw: dict = field(repr=False, default_factory=dict)

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()
        ).hexdigest()[:16]

    def env_config(self, seed: Optional[int] = None, g_th: Optional[float] = None) -> EnvConfig:
        """A fresh EnvConfig, optionally overriding the seed or compute budget."""
        e = self.raw["env"]
        return EnvConfig(
            n_users=e["n_users"],
            n_ecs=e["n_ecs"],
            aps_per_ec=e["aps_per_ec"],
            area=tuple(e["area"]),
            episode_len=e["episode_len"],
            dt=e["dt"],
            v_min=e["v_min"],
            v_max=e["v_max"],
            k_min=e["k_min"],
            tx_power_dbm=e["tx_power_dbm"],
            sinr=SinrParams(**self.raw["sinr"]),
            delay=DelayParams(**self.raw["delay"]),
            service=ServiceSpec(id=0, **self.raw["service"]),
            g_th=g_th if g_th is not None else e["g_th"],
            m_th=e["m_th"],
            w_nt=self.raw["weights"]["w_nt"],
            w_t=self.raw["weights"]["w_t"],
            drop_penalty=self.raw["weights"]["drop_penalty"],
            share_cell_pfs=e["share_cell_pfs"],
            initial_fs=tuple(e["initial_fs"]),
            seed=seed if seed is not None else e["seed"],
            table=FSConfigTable.from_dict(self.raw["fs_table"]),
        )


def from_dict(raw_in: dict) -> ExperimentConfig:
    raw = _merge(DEFAULTS, raw_in, "")
    table = FSConfigTable.from_dict(raw["fs_table"])

    env = EnvConfig(
        n_users=raw["env"]["n_users"],
        n_ecs=raw["env"]["n_ecs"],
        aps_per_ec=raw["env"]["aps_per_ec"],
        area=tuple(raw["env"]["area"]),
        episode_len=raw["env"]["episode_len"],
        dt=raw["env"]["dt"],
        v_min=raw["env"]["v_min"],
        v_max=raw["env"]["v_max"],
        k_min=raw["env"]["k_min"],
        tx_power_dbm=raw["env"]["tx_power_dbm"],
        sinr=SinrParams(**raw["sinr"]),
        delay=DelayParams(**raw["delay"]),
        service=ServiceSpec(id=0, **raw["service"]),
        g_th=raw["env"]["g_th"],
        m_th=raw["env"]["m_th"],
        w_nt=raw["weights"]["w_nt"],
        w_t=raw["weights"]["w_t"],
        drop_penalty=raw["weights"]["drop_penalty"],
        share_cell_pfs=raw["env"]["share_cell_pfs"],
        initial_fs=tuple(raw["env"]["initial_fs"]),
        seed=raw["env"]["seed"],
        table=table,
    )
    # record the resolved midhaul budget so the hash pins it
    raw["env"]["m_th"] = env.m_th

    if raw["obs_scales"]["high"] is not None:
        scales = ObsScales(
            high=np.asarray(raw["obs_scales"]["high"], dtype=np.float64),
            low=np.asarray(raw["obs_scales"]["low"], dtype=np.float64),
        )
    else:
        scales = ObsScales.from_env_config(env)
        raw["obs_scales"] = {"high": scales.high.tolist(), "low": scales.low.tolist()}
    if scales.high.shape != (3,) or scales.low.shape != (7,):
        raise SchemaError("obs_scales.high needs 3 entries and obs_scales.low needs 7")

    run = raw["run"]
    policy = run["policy"]
    _validate_policy_name(policy)
    if run["objective"] not in ("continuity", "reward_sum"):
        raise SchemaError(f"run.objective: unknown value {run['objective']!r}")
    seeds = list(run["seeds"])
    if not seeds:
        raise SchemaError("run.seeds: need at least one seed")
    if int(run["episodes"]) < 1:
        raise SchemaError("run.episodes: need at least one episode")
    if run["checkpoint"] is not None and not Path(run["checkpoint"]).exists():
        raise SchemaError(f"run.checkpoint: file not found: {run['checkpoint']}")

    if raw["sweep"]["axis"] != "g_th":
        raise SchemaError(f"sweep.axis: only 'g_th' is supported, got {raw['sweep']['axis']!r}")

    return ExperimentConfig(
        env=env,
        table=table,
        obs_scales=scales,
        ppo_high=PPOConfig(**raw["ppo"]["high"]),
        ppo_low=PPOConfig(**raw["ppo"]["low"]),
        train=TrainConfig(
            iters=raw["train"]["iters"],
            episodes_per_iter=raw["train"]["episodes_per_iter"],
            hidden=tuple(raw["train"]["hidden"]),
            seed=raw["train"]["seed"],
        ),
        policy=policy,
        episodes=int(run["episodes"]),
        seeds=[int(s) for s in seeds],
        out_dir=run["out_dir"],
        eval_greedy=bool(run["eval_greedy"]),
        objective=run["objective"],
        eval_drop_seed=int(run["eval_drop_seed"]),
        checkpoint=run["checkpoint"],
        sweep_axis=raw["sweep"]["axis"],
        sweep_values=[float(v) for v in raw["sweep"]["values"]],
        raw=raw,
    )


def _validate_policy_name(policy: str) -> None:
    if policy in ("hmarl", "random", "optimal"):
        return
    if policy.startswith("static:"):
        try:
            fs = int(policy.split(":", 1)[1])
        except ValueError:
            raise SchemaError(f"run.policy: bad static split in {policy!r}") from None
        if not 1 <= fs <= 7:
            raise SchemaError(f"run.policy: static split {fs} outside 1..7")
        return
    raise SchemaError(
        f"run.policy: unknown policy {policy!r} (use hmarl | static:<f> | random | optimal)"
    )


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise SchemaError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as err:
        raise SchemaError(f"config file {p} is not valid JSON: {err}") from None
    if not isinstance(raw, dict):
        raise SchemaError("config root must be a JSON object")
    return from_dict(raw)
