"""Desk-scale soft actor-critic trainer over the charging environment.

Off-policy, twin Q critics with target networks, a squashed-Gaussian
stochastic policy on [-1, 1]^n_ports, and automatic entropy-temperature
tuning.  Everything runs in float64 on a single CPU thread so training is
bit-reproducible for a fixed seed and gradients can be checked against
finite differences.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .env import ChargingEnv
from .policy import PolicyArtifact, save_policy

_DTYPE = torch.float64
LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0


@dataclass(frozen=True)
class SacConfig:
    total_steps: int = 100_000
    hidden: tuple[int, ...] = (256, 256)
    replay_capacity: int = 200_000
    batch_size: int = 256
    gamma: float = 0.99
    tau: float = 0.005
    lr: float = 3e-4
    target_entropy: float | None = None  # default: -n_ports
    warmup_steps: int = 1_000
    update_every: int = 2  # one gradient update per this many env steps
    eval_every: int = 5_000
    eval_episodes: int = 5
    checkpoint_dir: str | None = None
    log_path: str | None = None


@dataclass
class TrainResult:
    policy: PolicyArtifact
    best_eval_reward: float
    log_rows: list[tuple[int, float, float, float]] = field(default_factory=list)


class _MLP(nn.Module):
    def __init__(self, in_dim: int, hidden: tuple[int, ...], out_dim: int):
        super().__init__()
        layers: list[nn.Module] = []
        prev = in_dim
        for width in hidden:
            layers += [nn.Linear(prev, width, dtype=_DTYPE), nn.ReLU()]
            prev = width
        layers.append(nn.Linear(prev, out_dim, dtype=_DTYPE))
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x)


class Actor(nn.Module):
    """Squashed-Gaussian policy: tanh(mu + std * eps)."""

    def __init__(self, obs_dim: int, act_dim: int, hidden: tuple[int, ...]):
        super().__init__()
        self.trunk = nn.Sequential()
        prev = obs_dim
        mods: list[nn.Module] = []
        for width in hidden:
            mods += [nn.Linear(prev, width, dtype=_DTYPE), nn.ReLU()]
            prev = width
        self.trunk = nn.Sequential(*mods)
        self.mu_head = nn.Linear(prev, act_dim, dtype=_DTYPE)
        self.log_std_head = nn.Linear(prev, act_dim, dtype=_DTYPE)

    def forward(self, obs):
        h = self.trunk(obs)
        mu = self.mu_head(h)
        log_std = self.log_std_head(h).clamp(LOG_STD_MIN, LOG_STD_MAX)
        return mu, log_std

    def sample(self, obs, noise=None):
        """Reparameterized action and its log-probability.

        ``noise`` may pin the Gaussian draw (used by the gradient checks).
        """
        mu, log_std = self(obs)
        std = log_std.exp()
        eps = torch.randn_like(mu) if noise is None else noise
        z = mu + std * eps
        action = torch.tanh(z)
        log_prob = (-0.5 * (eps**2 + 2 * log_std + math.log(2 * math.pi))).sum(-1)
        # tanh change of variables, numerically stable form
        log_prob = log_prob - (2 * (math.log(2.0) - z - F.softplus(-2.0 * z))).sum(-1)
        return action, log_prob


class Critic(nn.Module):
    def __init__(self, obs_dim: int, act_dim: int, hidden: tuple[int, ...]):
        super().__init__()
        self.q = _MLP(obs_dim + act_dim, hidden, 1)

    def forward(self, obs, action):
        return self.q(torch.cat([obs, action], dim=-1)).squeeze(-1)


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, act_dim: int, seed: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.action = np.zeros((capacity, act_dim))
        self.reward = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.size = 0
        self.pos = 0
        self.rng = np.random.default_rng(seed)

    def add(self, obs, action, reward, next_obs, done):
        i = self.pos
        self.obs[i] = obs
        self.action[i] = action
        self.reward[i] = reward
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int) -> dict[str, torch.Tensor]:
        idx = self.rng.integers(0, self.size, size=batch_size)
        to = lambda a: torch.as_tensor(a, dtype=_DTYPE)
        return {
            "obs": to(self.obs[idx]),
            "action": to(self.action[idx]),
            "reward": to(self.reward[idx]),
            "next_obs": to(self.next_obs[idx]),
            "done": to(self.done[idx]),
        }


class SacTrainer:
    """Holds the networks and optimizers; exposes the losses for testing."""

    def __init__(self, env: ChargingEnv, config: SacConfig, seed: int):
        self.env = env
        self.config = config
        self.seed = seed
        torch.manual_seed(seed)
        obs_dim, act_dim = env.state_dim, env.n_ports
        self.act_dim = act_dim
        self.actor = Actor(obs_dim, act_dim, config.hidden)
        self.q1 = Critic(obs_dim, act_dim, config.hidden)
        self.q2 = Critic(obs_dim, act_dim, config.hidden)
        self.q1_target = Critic(obs_dim, act_dim, config.hidden)
        self.q2_target = Critic(obs_dim, act_dim, config.hidden)
        self.q1_target.load_state_dict(self.q1.state_dict())
        self.q2_target.load_state_dict(self.q2.state_dict())
        self.log_alpha = torch.zeros(1, dtype=_DTYPE, requires_grad=True)
        self.target_entropy = (
            config.target_entropy if config.target_entropy is not None else -float(act_dim)
        )
        self.opt_actor = torch.optim.Adam(self.actor.parameters(), lr=config.lr)
        self.opt_critic = torch.optim.Adam(
            list(self.q1.parameters()) + list(self.q2.parameters()), lr=config.lr
        )
        self.opt_alpha = torch.optim.Adam([self.log_alpha], lr=config.lr)
        self.buffer = ReplayBuffer(config.replay_capacity, obs_dim, act_dim, seed)
        self.np_rng = np.random.default_rng(seed)

    @property
    def alpha(self) -> torch.Tensor:
        return self.log_alpha.exp()

    def select_action(self, obs: np.ndarray, deterministic: bool = False) -> np.ndarray:
        with torch.no_grad():
            obs_t = torch.as_tensor(obs, dtype=_DTYPE).unsqueeze(0)
            if deterministic:
                mu, _ = self.actor(obs_t)
                action = torch.tanh(mu)
            else:
                action, _ = self.actor.sample(obs_t)
        return action.squeeze(0).numpy()

    def critic_loss(self, batch: dict[str, torch.Tensor], noise=None) -> torch.Tensor:
        with torch.no_grad():
            next_action, next_logp = self.actor.sample(batch["next_obs"], noise)
            q_next = torch.min(
                self.q1_target(batch["next_obs"], next_action),
                self.q2_target(batch["next_obs"], next_action),
            )
            target = batch["reward"] + self.config.gamma * (1.0 - batch["done"]) * (
                q_next - self.alpha.detach() * next_logp
            )
        q1 = self.q1(batch["obs"], batch["action"])
        q2 = self.q2(batch["obs"], batch["action"])
        return F.mse_loss(q1, target) + F.mse_loss(q2, target)

    def actor_alpha_losses(self, batch, noise=None) -> tuple[torch.Tensor, torch.Tensor]:
        action, logp = self.actor.sample(batch["obs"], noise)
        q = torch.min(self.q1(batch["obs"], action), self.q2(batch["obs"], action))
        actor_loss = (self.alpha.detach() * logp - q).mean()
        alpha_loss = -(self.log_alpha * (logp + self.target_entropy).detach()).mean()
        return actor_loss, alpha_loss

    def update(self, batch) -> dict[str, float]:
        critic_loss = self.critic_loss(batch)
        self.opt_critic.zero_grad(set_to_none=True)
        critic_loss.backward()
        self.opt_critic.step()

        actor_loss, alpha_loss = self.actor_alpha_losses(batch)
        self.opt_actor.zero_grad(set_to_none=True)
        actor_loss.backward()
        self.opt_actor.step()
        self.opt_alpha.zero_grad(set_to_none=True)
        alpha_loss.backward()
        self.opt_alpha.step()

        with torch.no_grad():
            for net, target in ((self.q1, self.q1_target), (self.q2, self.q2_target)):
                for p, pt in zip(net.parameters(), target.parameters()):
                    pt.mul_(1.0 - self.config.tau).add_(self.config.tau * p)

        out = {
            "critic_loss": critic_loss.item(),
            "actor_loss": actor_loss.item(),
            "alpha_loss": alpha_loss.item(),
        }
        if not all(math.isfinite(v) for v in out.values()):
            raise RuntimeError(f"training diverged: non-finite losses {out}")
        return out

    def policy_artifact(self) -> PolicyArtifact:
        with torch.no_grad():
            weights, biases = [], []
            for module in self.actor.trunk:
                if isinstance(module, nn.Linear):
                    weights.append(module.weight.numpy().T.copy())
                    biases.append(module.bias.numpy().copy())
            return PolicyArtifact(
                hidden_weights=tuple(weights),
                hidden_biases=tuple(biases),
                mu_weight=self.actor.mu_head.weight.numpy().T.copy(),
                mu_bias=self.actor.mu_head.bias.numpy().copy(),
                log_std_weight=self.actor.log_std_head.weight.numpy().T.copy(),
                log_std_bias=self.actor.log_std_head.bias.numpy().copy(),
                n_ports=self.env.n_ports,
                horizon=self.env.horizon,
            )


def _clone_env(env: ChargingEnv) -> ChargingEnv:
    return ChargingEnv(
        env.config,
        env.profiles,
        env.weights,
        env.horizon,
        env.net_export_credit,
        env.station_aggregate_kw,
    )


def _rollout_reward(env: ChargingEnv, policy: PolicyArtifact, seed: int) -> float:
    obs = env.reset(seed)
    total = 0.0
    while not env.done:
        obs, reward, _, _ = env.step(policy.mean_action(obs))
        total += reward
    return total


def train_agent(env: ChargingEnv, config: SacConfig, seed: int) -> TrainResult:
    """Train SAC on the environment; returns the best-evaluated policy.

    Training is single-threaded and fully seeded: the environment episode
    seeds, replay sampling, network initialization, and policy noise all
    derive from ``seed``.  Non-finite losses abort with diagnostics.
    """
    torch.set_num_threads(1)
    trainer = SacTrainer(env, config, seed)
    eval_env = _clone_env(env)
    eval_seeds = [10_000 + i for i in range(config.eval_episodes)]
    checkpoint_dir = Path(config.checkpoint_dir) if config.checkpoint_dir else None
    if checkpoint_dir:
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    episode = 0
    obs = env.reset(_episode_seed(seed, episode))
    best_reward = -np.inf
    best_policy = trainer.policy_artifact()
    log_rows: list[tuple[int, float, float, float]] = []
    losses = {"actor_loss": float("nan"), "critic_loss": float("nan")}

    for step in range(1, config.total_steps + 1):
        if step <= config.warmup_steps:
            action = trainer.np_rng.uniform(-1.0, 1.0, trainer.act_dim)
        else:
            action = trainer.select_action(obs)
        next_obs, reward, done, _ = env.step(action)
        trainer.buffer.add(obs, action, reward, next_obs, done)
        if done:
            episode += 1
            next_obs = env.reset(_episode_seed(seed, episode))
        obs = next_obs

        if (
            step > config.warmup_steps
            and trainer.buffer.size >= config.batch_size
            and step % config.update_every == 0
        ):
            losses = trainer.update(trainer.buffer.sample(config.batch_size))

        if step % config.eval_every == 0 or step == config.total_steps:
            policy = trainer.policy_artifact()
            eval_reward = float(
                np.mean([_rollout_reward(eval_env, policy, s) for s in eval_seeds])
            )
            log_rows.append(
                (step, losses["actor_loss"], losses["critic_loss"], eval_reward)
            )
            if checkpoint_dir:
                save_policy(policy, checkpoint_dir / f"policy_step{step}.npz")
            if eval_reward > best_reward:
                best_reward = eval_reward
                best_policy = policy

    if config.log_path:
        with open(config.log_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "actor_loss", "critic_loss", "eval_mean_reward"])
            writer.writerows(log_rows)
    return TrainResult(policy=best_policy, best_eval_reward=best_reward, log_rows=log_rows)


def _episode_seed(seed: int, episode: int) -> int:
    return seed * 1_000_003 + episode


def evaluate_policy(
    policy: PolicyArtifact,
    config,
    profiles,
    seeds: list[int],
    weights=None,
    scenario_name: str = "eval",
    net_export_credit: bool = False,
):
    """Deterministic-policy rollouts, one metrics row per seed."""
    from ..bench import run_episode  # local import to avoid a module cycle
    from .env import RewardWeights
    from .policy import PolicyController

    if len(set(seeds)) != len(seeds):
        raise ValueError("evaluation seeds must be distinct")
    policy.validate_signature(config.n_ports, policy.horizon)
    weights = weights or RewardWeights()
    controller = PolicyController(policy)
    rows = []
    for seed in seeds:
        outcome = run_episode(
            config,
            profiles,
            controller,
            seed,
            weights=weights,
            scenario_name=scenario_name,
            strategy_name="sac",
            net_export_credit=net_export_credit,
        )
        rows.append(outcome)
    return rows


def gradient_check(
    trainer: SacTrainer,
    batch: dict[str, torch.Tensor],
    rel_tol: float = 1e-4,
    fd_step: float = 1e-5,
) -> float:
    """Fraction of parameters whose analytic gradient matches central differences.

    The policy noise is frozen so both loss functions are deterministic in
    the parameters; everything runs in float64.  Gradient entries below the
    finite-difference resolution of the loss magnitude are compared with an
    absolute tolerance, as in standard gradcheck practice.
    """
    noise = torch.randn_like(batch["action"])

    checks = [
        (
            list(trainer.q1.parameters()) + list(trainer.q2.parameters()),
            lambda: trainer.critic_loss(batch, noise=noise),
        ),
        (
            list(trainer.actor.parameters()),
            lambda: trainer.actor_alpha_losses(batch, noise=noise)[0],
        ),
    ]
    matched = 0
    total = 0
    for params, loss_fn in checks:
        loss = loss_fn()
        abs_tol = 1e-10 * max(1.0, abs(loss.item()))
        grads = torch.autograd.grad(loss, params, allow_unused=True)
        for p, g in zip(params, grads):
            g = torch.zeros_like(p) if g is None else g
            flat = p.data.view(-1)
            gflat = g.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                h = fd_step * max(1.0, abs(orig))
                flat[i] = orig + h
                up = loss_fn().item()
                flat[i] = orig - h
                down = loss_fn().item()
                flat[i] = orig
                fd = (up - down) / (2 * h)
                an = gflat[i].item()
                denom = max(abs(fd), abs(an), 1e-8)
                if abs(fd - an) / denom <= rel_tol or abs(fd - an) <= abs_tol:
                    matched += 1
                total += 1
    return matched / total
