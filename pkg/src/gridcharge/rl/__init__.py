"""Emission-aware RL environment, reward design, and a desk-scale SAC trainer."""

from ..engine import map_action
from .env import (
    ChargingEnv,
    RewardWeights,
    build_state,
    compute_reward,
    satisfaction_penalty,
    state_length,
)
from .policy import PolicyArtifact, load_policy, save_policy
from .sac import SacConfig, evaluate_policy, train_agent

__all__ = [
    "ChargingEnv",
    "RewardWeights",
    "build_state",
    "compute_reward",
    "satisfaction_penalty",
    "state_length",
    "map_action",
    "PolicyArtifact",
    "save_policy",
    "load_policy",
    "SacConfig",
    "train_agent",
    "evaluate_policy",
]
