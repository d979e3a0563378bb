"""Experiment orchestration: seeded runs, CSV metrics, manifests, sweeps.

Outputs per run directory:
  timeseries.csv  - one row per (seed, episode, timestep)
  summary.csv     - one row per (seed, episode)
  cdf_<metric>.csv - empirical CDF exports of summary columns
  manifest.json   - version, config hash and a content hash of every file
All files carry a `# schema=v1` header line and fixed float formatting, so a
repeated run with the same config and seeds is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .env import SoftSplitEnv, StepOutcome
from .errors import ConfigError
from .hmarl.policy import load_checkpoint, save_checkpoint
from .hmarl.train import LearnedPolicy, TrainConfig, train
from .optimizer import BruteForceOptimalPolicy, Policy, RandomPolicy, StaticPolicy

log = logging.getLogger(__name__)

SCHEMA_LINE = "# schema=v1"

SUMMARY_COLUMNS = (
    "episode",
    "seed",
    "gops_violation_steps",
    "midhaul_violation_steps",
    "dropped_user_pct",
    "r_t_mean",
    "r_nt_mean",
    "objective_mean",
    "r_cc_mean",
)

TIMESERIES_COLUMNS = (
    "seed",
    "episode",
    "t",
    "fs_t",
    "fs_nt",
    "gops_violation",
    "midhaul_violation",
    "n_dropped",
    "n_disconnected",
    "n_connected",
    "r_t",
    "r_nt",
    "objective",
    "r_cc",
)


@dataclass
class EpisodeMetrics:
    episode: int
    seed: int
    gops_violation_steps: int
    midhaul_violation_steps: int
    dropped_user_pct: float
    r_t_mean: float
    r_nt_mean: float
    objective_mean: float
    r_cc_mean: float

    def row(self) -> list:
        return [getattr(self, c) for c in SUMMARY_COLUMNS]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w") as f:
        f.write(SCHEMA_LINE + "\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def export_cdf(values: Sequence[float], path: Path) -> list[tuple[float, float]]:
    """Empirical CDF rows (value, cumulative fraction), duplicates collapsed."""
    vals = sorted(float(v) for v in values)
    if not vals:
        raise ConfigError("export_cdf needs at least one value")
    n = len(vals)
    rows: list[tuple[float, float]] = []
    for i, v in enumerate(vals):
        frac = (i + 1) / n
        if rows and rows[-1][0] == v:
            rows[-1] = (v, frac)
        else:
            rows.append((v, frac))
    _write_csv(Path(path), ("value", "cdf"), rows)
    return rows


def load_cdf(path: Path) -> list[tuple[float, float]]:
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("value"):
                continue
            v, c = line.split(",")
            rows.append((float(v), float(c)))
    return rows


def make_policy(cfg: ExperimentConfig, seed: int = 0) -> Policy:
    """Instantiate the policy named by the config (CLI --policy flag)."""
    name = cfg.policy
    if name.startswith("static:"):
        return StaticPolicy(int(name.split(":", 1)[1]))
    if name == "random":
        return RandomPolicy(seed=seed)
    if name == "optimal":
        return BruteForceOptimalPolicy(eval_seed=cfg.eval_drop_seed, objective=cfg.objective)
    if name == "hmarl":
        if cfg.checkpoint is None:
            raise ConfigError("policy 'hmarl' needs run.checkpoint pointing at trained parameters")
        high, low, _meta = load_checkpoint(cfg.checkpoint)
        return LearnedPolicy(high, low, cfg.obs_scales, greedy=cfg.eval_greedy, seed=seed)
    raise ConfigError(f"unknown policy {name!r}")


def run_episode(env: SoftSplitEnv, policy: Policy) -> list[StepOutcome]:
    """Drive one full episode through the two-turn protocol."""
    outcomes = []
    obs = env.high_obs()
    done = False
    while not done:
        a_cc = policy.act_high(env, obs)
        low_obs = env.step_high(a_cc)
        actions = policy.act_low(env, low_obs)
        outcome = env.step_low(actions)
        outcomes.append(outcome)
        done = outcome.done
        if not done:
            obs = env.high_obs()
    return outcomes


def episode_metrics(
    outcomes: list[StepOutcome], episode: int, seed: int, n_users: int
) -> EpisodeMetrics:
    steps = len(outcomes)
    total_drops = sum(len(o.dropped) for o in outcomes)
    denom = n_users * steps
    return EpisodeMetrics(
        episode=episode,
        seed=seed,
        gops_violation_steps=sum(1 for o in outcomes if any(o.gops_violation.values())),
        midhaul_violation_steps=sum(1 for o in outcomes if o.midhaul_violation),
        dropped_user_pct=100.0 * total_drops / denom if denom else 0.0,
        r_t_mean=sum(o.r_t for o in outcomes) / steps,
        r_nt_mean=sum(o.r_nt for o in outcomes) / steps,
        objective_mean=sum(o.objective for o in outcomes) / steps,
        r_cc_mean=sum(o.high_reward for o in outcomes) / steps,
    )


def episode_env_seed(seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed, episode]).generate_state(1)[0])


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: Optional[Path] = None,
    g_th: Optional[float] = None,
    cdf_metrics: Sequence[str] = ("dropped_user_pct", "r_nt_mean"),
) -> list[EpisodeMetrics]:
    """Evaluate the configured policy over every (seed, episode) pair."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary: list[EpisodeMetrics] = []
    ts_rows: list[list] = []
    t0 = time.time()
    for seed in cfg.seeds:
        for ep in range(cfg.episodes):
            env = SoftSplitEnv(cfg.env_config(seed=episode_env_seed(seed, ep), g_th=g_th))
            policy = make_policy(cfg, seed=episode_env_seed(seed, ep) ^ 0x5EED)
            outcomes = run_episode(env, policy)
            summary.append(episode_metrics(outcomes, ep, seed, cfg.env.n_users))
            for o in outcomes:
                ts_rows.append(
                    [
                        seed,
                        ep,
                        o.t,
                        o.fs_transitional,
                        "|".join(str(o.fs_non_transitional[e]) for e in sorted(o.fs_non_transitional)),
                        any(o.gops_violation.values()),
                        o.midhaul_violation,
                        len(o.dropped),
                        len(o.disconnected),
                        o.n_connected,
                        o.r_t,
                        o.r_nt,
                        o.objective,
                        o.high_reward,
                    ]
                )
    log.info(
        "policy=%s: %d episodes in %.1fs",
        cfg.policy,
        len(summary),
        time.time() - t0,
    )

    _write_csv(out / "timeseries.csv", TIMESERIES_COLUMNS, ts_rows)
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, [m.row() for m in summary])
    files = ["timeseries.csv", "summary.csv"]
    for metric in cdf_metrics:
        name = f"cdf_{metric}.csv"
        export_cdf([getattr(m, metric) for m in summary], out / name)
        files.append(name)
    write_manifest(out, cfg, files)
    return summary


def run_training(
    cfg: ExperimentConfig,
    out_dir: Optional[Path] = None,
    iters: Optional[int] = None,
) -> Path:
    """Train the hierarchical policies and write the final checkpoint."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tc = cfg.train
    if iters is not None:
        tc = TrainConfig(
            iters=iters,
            episodes_per_iter=tc.episodes_per_iter,
            hidden=tc.hidden,
            seed=tc.seed,
            checkpoint_every=tc.checkpoint_every,
        )

    def factory(seed: int) -> SoftSplitEnv:
        return SoftSplitEnv(cfg.env_config(seed=seed))

    result = train(
        factory,
        cfg.ppo_high,
        cfg.ppo_low,
        tc,
        scales=cfg.obs_scales,
        out_dir=str(out),
        progress=lambda row: log.info(
            "iter %d: return=%.3f", row["iteration"], row["episode_return_high"]
        ),
    )
    ckpt = out / f"checkpoint_{tc.iters}.bin"
    save_checkpoint(ckpt, result.high, result.low, {"iterations": tc.iters, "config": cfg.config_hash()})
    curve_cols = list(result.curves[0].keys())
    _write_csv(out / "training_curves.csv", curve_cols, [[r[c] for c in curve_cols] for r in result.curves])
    write_manifest(out, cfg, ["training_curves.csv", ckpt.name])
    return ckpt


def run_sweep(
    cfg: ExperimentConfig,
    out_dir: Optional[Path] = None,
    values: Optional[Sequence[float]] = None,
) -> dict[float, list[EpisodeMetrics]]:
    """Re-evaluate the configured policy across compute budgets."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    axis_values = [float(v) for v in (values if values is not None else cfg.sweep_values)]
    results: dict[float, list[EpisodeMetrics]] = {}
    rows = []
    for v in axis_values:
        point_dir = out / f"gth_{int(v)}"
        metrics = run_experiment(cfg, point_dir, g_th=v)
        results[v] = metrics
        rows.append(
            [
                v,
                sum(m.objective_mean for m in metrics) / len(metrics),
                sum(m.r_t_mean for m in metrics) / len(metrics),
                sum(m.r_nt_mean for m in metrics) / len(metrics),
                sum(m.dropped_user_pct for m in metrics) / len(metrics),
            ]
        )
    _write_csv(
        out / "sweep_summary.csv",
        ("g_th", "objective_mean", "r_t_mean", "r_nt_mean", "dropped_user_pct"),
        rows,
    )
    write_manifest(out, cfg, ["sweep_summary.csv"])
    return results


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, cfg: ExperimentConfig, files: Sequence[str]) -> Path:
    manifest = {
        "version": f"softsplit-{__version__}+cfg.{cfg.config_hash()}",
        "config_hash": cfg.config_hash(),
        "config": cfg.raw,
        "files": {name: _sha256(out / name) for name in sorted(files)},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
