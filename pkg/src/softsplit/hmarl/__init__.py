from .policy import (
    PolicyParams,
    act_greedy,
    aggregate_shared_policy,
    forward_policy,
    load_checkpoint,
    sample_action,
    save_checkpoint,
)
from .ppo import (
    AdamState,
    Batch,
    PPOConfig,
    Trajectory,
    batch_from_trajectories,
    clipped_surrogate,
    compute_gae,
    ppo_gradients,
    ppo_loss,
    ppo_update,
)
from .train import LearnedPolicy, ObsScales, TrainConfig, TrainResult, rollout_episode, train

__all__ = [
    "PolicyParams",
    "act_greedy",
    "aggregate_shared_policy",
    "forward_policy",
    "load_checkpoint",
    "sample_action",
    "save_checkpoint",
    "AdamState",
    "Batch",
    "PPOConfig",
    "Trajectory",
    "batch_from_trajectories",
    "clipped_surrogate",
    "compute_gae",
    "ppo_gradients",
    "ppo_loss",
    "ppo_update",
    "LearnedPolicy",
    "ObsScales",
    "TrainConfig",
    "TrainResult",
    "rollout_episode",
    "train",
]
