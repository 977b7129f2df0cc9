"""Trainer mechanics: artifacts, determinism, divergence guard, gradient check."""

import numpy as np
import pytest
import torch

from gridcharge.bench import build_scenario_profiles, run_episode
from gridcharge.profiles import PenetrationSpec, SourceMix
from gridcharge.rl.env import ChargingEnv
from gridcharge.rl.policy import (
    PolicyController,
    RandomController,
    load_policy,
    save_policy,
)
from gridcharge.rl.sac import SacConfig, SacTrainer, gradient_check, train_agent
from gridcharge.scenario import default_config


def tiny_env(n_ports=2, horizon=4):
    config = default_config(n_ports=n_ports)
    profiles = build_scenario_profiles(config, PenetrationSpec(0.5, SourceMix.HYBRID))
    return ChargingEnv(config, profiles, horizon=horizon)


def tiny_config(**kw):
    defaults = dict(
        total_steps=300,
        hidden=(16, 16),
        batch_size=32,
        warmup_steps=64,
        update_every=1,
        eval_every=150,
        eval_episodes=2,
    )
    defaults.update(kw)
    return SacConfig(**defaults)


def filled_trainer(env=None, seed=0, steps=200):
    env = env or tiny_env()
    trainer = SacTrainer(env, tiny_config(), seed)
    rng = np.random.default_rng(seed)
    obs = env.reset(0)
    for _ in range(steps):
        action = rng.uniform(-1, 1, env.n_ports)
        nobs, reward, done, _ = env.step(action)
        trainer.buffer.add(obs, action, reward, nobs, done)
        obs = env.reset(1) if done else nobs
    return trainer


class TestPolicyArtifact:
    def test_roundtrip(self, tmp_path):
        trainer = filled_trainer()
        policy = trainer.policy_artifact()
        path = tmp_path / "policy.npz"
        save_policy(policy, path)
        loaded = load_policy(path)
        assert loaded.n_ports == policy.n_ports
        assert loaded.horizon == policy.horizon
        obs = np.random.default_rng(0).normal(size=policy.obs_dim)
        assert np.array_equal(loaded.mean_action(obs), policy.mean_action(obs))
        for w in loaded.hidden_weights:
            assert w.dtype == np.float64

    def test_signature_validation(self, tmp_path):
        trainer = filled_trainer()
        policy = trainer.policy_artifact()
        with pytest.raises(ValueError, match="does not match"):
            policy.validate_signature(n_ports=7, horizon=policy.horizon)
        policy.validate_signature(n_ports=policy.n_ports, horizon=policy.horizon)

    def test_actions_bounded(self):
        trainer = filled_trainer()
        policy = trainer.policy_artifact()
        rng = np.random.default_rng(3)
        for _ in range(50):
            a = policy.mean_action(rng.normal(size=policy.obs_dim) * 10)
            assert np.all(np.abs(a) <= 1.0)

    def test_matches_torch_actor(self):
        trainer = filled_trainer()
        policy = trainer.policy_artifact()
        obs = np.random.default_rng(1).normal(size=policy.obs_dim)
        numpy_action = policy.mean_action(obs)
        torch_action = trainer.select_action(obs, deterministic=True)
        assert numpy_action == pytest.approx(torch_action, rel=1e-12)


class TestTrainerMechanics:
    def test_update_returns_finite_losses(self):
        trainer = filled_trainer()
        losses = trainer.update(trainer.buffer.sample(32))
        assert all(np.isfinite(v) for v in losses.values())

    def test_divergence_detector(self):
        trainer = filled_trainer()
        with torch.no_grad():
            for p in trainer.q1.parameters():
                p.fill_(float("nan"))
        with pytest.raises(RuntimeError, match="diverged"):
            trainer.update(trainer.buffer.sample(32))

    def test_training_determinism(self):
        results = []
        for _ in range(2):
            env = tiny_env()
            result = train_agent(env, tiny_config(), seed=11)
            results.append(result)
        assert results[0].log_rows == results[1].log_rows
        a, b = results[0].policy, results[1].policy
        for wa, wb in zip(a.hidden_weights, b.hidden_weights):
            assert np.array_equal(wa, wb)

    def test_zero_training_steps_returns_untrained_policy(self):
        env = tiny_env()
        result = train_agent(env, tiny_config(total_steps=0), seed=5)
        # An untrained policy behaves like a fresh random-init policy: both are
        # far from any optimized behaviour, so their episode rewards share scale.
        fresh = SacTrainer(tiny_env(), tiny_config(), seed=99).policy_artifact()
        profiles = env.profiles
        config = env.config
        seeds = list(range(300, 306))
        untrained = np.mean(
            [
                run_episode(config, profiles, PolicyController(result.policy), s).total_reward
                for s in seeds
            ]
        )
        fresh_reward = np.mean(
            [
                run_episode(config, profiles, PolicyController(fresh), s).total_reward
                for s in seeds
            ]
        )
        assert untrained == pytest.approx(fresh_reward, rel=0.2)

    def test_training_log_schema(self, tmp_path):
        env = tiny_env()
        log_path = tmp_path / "log.csv"
        train_agent(env, tiny_config(log_path=str(log_path)), seed=2)
        lines = log_path.read_text().strip().splitlines()
        assert lines[0] == "step,actor_loss,critic_loss,eval_mean_reward"
        assert len(lines) >= 2

    def test_checkpoints_written(self, tmp_path):
        env = tiny_env()
        train_agent(env, tiny_config(checkpoint_dir=str(tmp_path)), seed=2)
        assert list(tmp_path.glob("policy_step*.npz"))


class TestGradientCheck:
    def test_analytic_matches_finite_differences(self):
        trainer = filled_trainer(steps=120)
        torch.manual_seed(0)
        batch = trainer.buffer.sample(16)
        fraction = gradient_check(trainer, batch, rel_tol=1e-4)
        assert fraction >= 0.95


class TestEvaluatePolicy:
    def test_rows_and_paired_ordering(self):
        from gridcharge.rl.sac import evaluate_policy

        env = tiny_env()
        result = train_agent(env, tiny_config(total_steps=0), seed=3)
        seeds = list(range(40, 50))
        rows = evaluate_policy(result.policy, env.config, env.profiles, seeds)
        assert len(rows) == 10
        assert [r.seed for r in rows] == seeds
        with pytest.raises(ValueError, match="distinct"):
            evaluate_policy(result.policy, env.config, env.profiles, [1, 1])

    def test_zero_policy_serves_nothing(self):
        env = tiny_env()
        from gridcharge.rl.policy import ZeroController

        row = run_episode(env.config, env.profiles, ZeroController(), 7)
        assert row.charged_kwh == 0.0
        assert row.satisfaction_pct is not None and row.satisfaction_pct < 100.0

    def test_random_policy_below_afap_satisfaction(self):
        from gridcharge.bench import make_controller

        env = tiny_env()
        seeds = range(60, 70)
        for seed in seeds:
            afap = run_episode(env.config, env.profiles, make_controller("afap", env.config), seed)
            rand = run_episode(env.config, env.profiles, RandomController(seed), seed)
            assert rand.satisfaction_pct < afap.satisfaction_pct
