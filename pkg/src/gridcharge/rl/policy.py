"""Self-describing policy artifacts and the numpy inference path.

An artifact stores the actor MLP layer shapes and weights as little-endian
64-bit floats together with the environment signature (ports, horizon,
transformer count) so a mismatch is caught at load time.  Inference needs
only numpy: the deterministic action is tanh of the mean head.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..engine import Simulator
from ..profiles import ProfileBundle
from .env import N_TRANSFORMERS, build_state, state_length

_F8 = np.dtype("<f8")


@dataclass(frozen=True)
class PolicyArtifact:
    """Actor weights plus the environment signature they were trained for."""

    hidden_weights: tuple[np.ndarray, ...]  # (in, out) matrices
    hidden_biases: tuple[np.ndarray, ...]
    mu_weight: np.ndarray
    mu_bias: np.ndarray
    log_std_weight: np.ndarray
    log_std_bias: np.ndarray
    n_ports: int
    horizon: int
    n_transformers: int = N_TRANSFORMERS

    @property
    def obs_dim(self) -> int:
        return int(self.hidden_weights[0].shape[0])

    def mean_action(self, obs: np.ndarray) -> np.ndarray:
        """Deterministic action: tanh of the Gaussian mean."""
        x = np.asarray(obs, dtype=np.float64)
        for w, b in zip(self.hidden_weights, self.hidden_biases):
            x = np.maximum(x @ w + b, 0.0)
        return np.tanh(x @ self.mu_weight + self.mu_bias)

    def validate_signature(self, n_ports: int, horizon: int) -> None:
        if (self.n_ports, self.horizon, self.n_transformers) != (
            n_ports,
            horizon,
            N_TRANSFORMERS,
        ):
            raise ValueError(
                f"policy trained for (ports={self.n_ports}, H={self.horizon}, "
                f"tr={self.n_transformers}) does not match (ports={n_ports}, H={horizon})"
            )
        expected = state_length(self.n_transformers, self.horizon, self.n_ports)
        if self.obs_dim != expected:
            raise ValueError(f"policy obs_dim {self.obs_dim} != expected {expected}")


def save_policy(policy: PolicyArtifact, path: str | Path) -> None:
    arrays = {
        "signature": np.asarray(
            [policy.n_ports, policy.horizon, policy.n_transformers, len(policy.hidden_weights)],
            dtype=np.int64,
        ),
        "mu_w": policy.mu_weight.astype(_F8),
        "mu_b": policy.mu_bias.astype(_F8),
        "log_std_w": policy.log_std_weight.astype(_F8),
        "log_std_b": policy.log_std_bias.astype(_F8),
    }
    for i, (w, b) in enumerate(zip(policy.hidden_weights, policy.hidden_biases)):
        arrays[f"hidden_{i}_w"] = w.astype(_F8)
        arrays[f"hidden_{i}_b"] = b.astype(_F8)
    np.savez(path, **arrays)


def load_policy(path: str | Path) -> PolicyArtifact:
    with np.load(path) as data:
        n_ports, horizon, n_tr, n_hidden = (int(v) for v in data["signature"])
        hidden_w = tuple(data[f"hidden_{i}_w"].astype(np.float64) for i in range(n_hidden))
        hidden_b = tuple(data[f"hidden_{i}_b"].astype(np.float64) for i in range(n_hidden))
        return PolicyArtifact(
            hidden_weights=hidden_w,
            hidden_biases=hidden_b,
            mu_weight=data["mu_w"].astype(np.float64),
            mu_bias=data["mu_b"].astype(np.float64),
            log_std_weight=data["log_std_w"].astype(np.float64),
            log_std_bias=data["log_std_b"].astype(np.float64),
            n_ports=n_ports,
            horizon=horizon,
            n_transformers=n_tr,
        )


class PolicyController:
    """Adapts a policy artifact to the benchmark controller interface."""

    def __init__(self, policy: PolicyArtifact):
        self.policy = policy

    def act(self, sim: Simulator, profiles: ProfileBundle) -> np.ndarray:
        obs = build_state(sim.state, profiles, self.policy.horizon)
        return self.policy.mean_action(obs)


class RandomController:
    """Uniform random actions in [-1, 1]; the untrained baseline."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def act(self, sim: Simulator, profiles: ProfileBundle) -> np.ndarray:
        return self.rng.uniform(-1.0, 1.0, sim.topology.n_ports)


class ZeroController:
    """All ports idle; the do-nothing baseline."""

    def act(self, sim: Simulator, profiles: ProfileBundle) -> np.ndarray:
        return np.zeros(sim.topology.n_ports)
