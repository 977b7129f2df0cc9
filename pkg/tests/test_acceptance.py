"""Acceptance gate: every release criterion at its stated tolerance.

Each test records a pass/fail line for the terminal summary.  The trained-
policy criterion runs a full desk-scale training (roughly 20-40 minutes on
a laptop CPU); everything else completes in seconds to a few minutes.
"""

import json
import subprocess
import sys

import numpy as np
import pytest
import torch

from gridcharge.bench import (
    DEFAULT_SCENARIOS,
    HEURISTIC_STRATEGIES,
    SweepSpec,
    build_scenario_profiles,
    make_controller,
    run_episode,
    run_matrix,
    sweep,
)
from gridcharge.emissions import carbon_intensity_metric, step_emission
from gridcharge.engine import soc_step
from gridcharge.mpc import MpcMode, mpc_act
from gridcharge.profiles import PenetrationSpec, SourceMix
from gridcharge.rl.env import (
    ChargingEnv,
    RewardWeights,
    compute_reward,
    satisfaction_penalty,
    state_length,
)
from gridcharge.rl.policy import PolicyController, RandomController
from gridcharge.rl.sac import SacConfig, SacTrainer, gradient_check, train_agent
from gridcharge.scenario import default_config

from tests.conftest import record_criterion
from tests.test_engine import make_ev
from tests.test_mpc import (
    GRID,
    MpcSettings as _MpcSettings,
    enumerate_best,
    lp_step0_net,
    random_toy,
    toy_sim,
)
from gridcharge.scenario import EvSession

MINI_PORTS = 5
MINI_PENETRATION = PenetrationSpec(0.5, SourceMix.HYBRID)


def _record(number, name, ok, detail=""):
    record_criterion(number, name, ok, detail)
    assert ok, f"criterion {number} failed: {name} {detail}"


class TestCriterion1FormulaExactness:
    def test_soc_formulas(self):
        rng = np.random.default_rng(0)
        max_err = 0.0
        for _ in range(1000):
            soc = float(rng.uniform(0, 1))
            power = float(rng.uniform(-30, 30))
            cap = float(rng.uniform(5, 80))
            out = soc_step(make_ev(soc=soc, capacity=cap, tau=1.0), power, 0.25)
            linear = min(1.0, max(0.0, soc + power * 0.25 / cap))
            max_err = max(max_err, abs(out.soc - linear))
        linear_ok = max_err <= 1e-12

        out = soc_step(make_ev(soc=0.9, tau=0.8), 22.0, 0.25)
        exp_ok = abs(out.soc - 0.9423) <= 1e-4
        _record(
            1,
            "two-stage SoC formulas",
            linear_ok and exp_ok,
            f"linear max err {max_err:.2e}; CV branch {out.soc:.6f} vs 0.9423",
        )


class TestCriterion2EmissionArithmetic:
    def test_worked_values(self):
        ok = step_emission(10.0, 0.5) == 5.0 and step_emission(1.0, 0.7) == 0.7
        _record(2, "per-step emission worked values", ok)


class TestCriterion3CiCrossCheck:
    def test_reference_rows(self):
        pairs = [
            (67.62, 340.58, 198.54),
            (8.52, 355.53, 23.96),
            (48.41, 314.21, 154.07),
            (25.47, 363.54, 70.06),
            (10.02, 267.53, 37.45),
        ]
        worst = max(
            abs(carbon_intensity_metric(co2, charged) - expected)
            for co2, charged, expected in pairs
        )
        _record(3, "carbon-intensity metric cross-check", worst <= 0.01, f"worst |err| {worst:.4f}")


class TestCriterion4RewardWorkedExamples:
    def test_values(self):
        weights = RewardWeights()

        class Step:
            served_kwh = 0.0
            discharged_kwh = 0.0
            curtailed_kwh = 0.0

        discharge_step = Step()
        discharge_step.discharged_kwh = 1.0
        r1 = compute_reward(discharge_step, 0.0, None, weights)
        serve_step = Step()
        serve_step.served_kwh = 10.0
        r2 = compute_reward(serve_step, 5.0, None, weights)
        p = satisfaction_penalty(0.7, weights)
        ok = r1 == -50.0 and r2 == -25.0 and p == 5.0
        _record(4, "reward worked examples", ok, f"{r1}, {r2}, penalty {p}")


class TestCriterion5MpcOracle:
    def test_oracle_equivalence(self):
        cases = [
            (MpcMode.G2V, 1, 2, 4.0, 0, False, False),
            (MpcMode.G2V, 1, 3, 4.0, 1, False, False),
            (MpcMode.G2V, 1, 4, 4.0, 2, False, False),
            (MpcMode.G2V, 1, 4, 4.0, 3, False, False),
            (MpcMode.G2V, 1, 3, 4.0, 4, True, False),
            (MpcMode.G2V, 1, 4, 4.0, 5, True, False),
            (MpcMode.G2V, 2, 2, 4.0, 6, False, False),
            (MpcMode.G2V, 2, 2, 4.0, 7, False, True),
            (MpcMode.G2V, 2, 3, 4.0, 8, False, False),
            (MpcMode.G2V, 2, 3, 4.0, 9, False, True),
            (MpcMode.V2G, 1, 2, 4.0, 10, False, False),
            (MpcMode.V2G, 1, 2, 4.0, 11, False, False),
            (MpcMode.V2G, 1, 2, 4.0, 12, True, False),
            (MpcMode.V2G, 1, 3, 4.0, 13, False, False),
            (MpcMode.V2G, 1, 3, 4.0, 14, False, False),
            (MpcMode.V2G, 2, 2, 2.0, 15, False, False),
            (MpcMode.V2G, 2, 2, 2.0, 16, False, True),
            (MpcMode.V2G, 2, 2, 2.0, 17, True, False),
            (MpcMode.G2V, 2, 2, 4.0, 18, True, False),
            (MpcMode.V2G, 1, 3, 4.0, 19, True, False),
            (MpcMode.G2V, 1, 4, 4.0, 20, False, False),
            (MpcMode.V2G, 2, 2, 2.0, 21, False, False),
        ]
        worst = 0.0
        for mode, n_evs, horizon, rate, seed, tight_tr, tight_st in cases:
            rng = np.random.default_rng(seed)
            sim, profiles = random_toy(rng, mode, n_evs, horizon, rate, tight_tr, tight_st)
            settings = _MpcSettings(mode=mode, horizon=horizon)
            bf_step0, _ = enumerate_best(sim, profiles, horizon, settings, mode)
            lp_net, _ = lp_step0_net(sim, settings, profiles)
            worst = max(worst, abs(lp_net - bf_step0))
        grid_ok = worst <= GRID + 1e-6

        # the clean-step deferral instance
        session = EvSession(0, 2, 50.0, 0.5, 0.61, 1.0, 0)
        sim, profiles = toy_sim([session], [0.5, 0.1], rate_kw=22.0)
        settings = _MpcSettings(mode=MpcMode.G2V, horizon=2)
        a0 = mpc_act(MpcMode.G2V, sim, profiles, 2, settings)[0]
        sim.step(np.array([a0]))
        a1 = mpc_act(MpcMode.G2V, sim, profiles, 2, settings)[0]
        defer_ok = abs(a0) <= 1e-9 and abs(a1 - 1.0) <= 1e-9
        _record(
            5,
            "MPC matches exhaustive search on toys",
            grid_ok and defer_ok,
            f"{len(cases)} instances, worst step-0 gap {worst:.3f} kWh",
        )


class TestCriterion6StrategyOrdering:
    def test_paired_orderings(self):
        config = default_config()
        result = run_matrix(
            config,
            scenarios=(DEFAULT_SCENARIOS[0], DEFAULT_SCENARIOS[2]),  # no_re, wind_50
            strategies=HEURISTIC_STRATEGIES,
            n_runs=10,
            base_seed=1000,
        )
        rows = {(r.scenario, r.strategy, r.seed): r for r in result.rows}
        seeds = range(1000, 1010)
        sat_wins = sum(
            rows[("no_re", "afap", s)].satisfaction_pct
            > rows[("no_re", "rr", s)].satisfaction_pct
            for s in seeds
        )
        overload_wins = sum(
            rows[("no_re", "alap", s)].overload_kwh < rows[("no_re", "afap", s)].overload_kwh
            for s in seeds
        )
        worst_ratio = 0.0
        for strategy in HEURISTIC_STRATEGIES:
            no_re = sum(rows[("no_re", strategy, s)].co2_kg for s in seeds)
            wind = sum(rows[("wind_50", strategy, s)].co2_kg for s in seeds)
            worst_ratio = max(worst_ratio, wind / no_re)
        ok = sat_wins >= 9 and overload_wins == 10 and worst_ratio < 0.10
        _record(
            6,
            "heuristic ordering reproduction",
            ok,
            f"sat wins {sat_wins}/10, overload wins {overload_wins}/10, "
            f"worst wind/no-RE CO2 ratio {worst_ratio:.4f}",
        )


class TestCriterion7RenewableConservation:
    def test_episode_identities(self):
        config = default_config(n_ports=6)
        profiles = build_scenario_profiles(config, PenetrationSpec(0.4, SourceMix.HYBRID))
        env = ChargingEnv(config, profiles)
        rng = np.random.default_rng(2)
        worst = 0.0
        for episode in range(3):
            env.reset(episode)
            while not env.done:
                _, _, _, info = env.step(rng.uniform(-1, 1, 6))
                r = info["step_result"]
                supply = profiles.solar.value_at(r.step) + profiles.wind.value_at(r.step)
                demand = r.ev_charge_kw
                used = r.renewables_used_kw
                scale = max(1.0, supply, demand)
                worst = max(
                    worst,
                    abs(used + r.curtailed_kw - supply) / scale,
                    abs(r.grid_import_ev_kw + used - demand) / scale,
                )
        _record(7, "renewable split conservation", worst <= 1e-9, f"worst rel err {worst:.2e}")


@pytest.fixture(scope="module")
def mini_scenario():
    config = default_config(n_ports=MINI_PORTS)
    profiles = build_scenario_profiles(config, MINI_PENETRATION)
    return config, profiles


class TestCriterion8RlSuite:
    def test_a_state_length(self):
        config = default_config()
        profiles = build_scenario_profiles(config, PenetrationSpec(0.0))
        env = ChargingEnv(config, profiles, horizon=20)
        state = env.reset(0)
        ok = state.shape == (135,) and state_length(1, 20, 25) == 135
        _record(8, "RL state length 135 (8a)", ok, f"len {state.shape[0]}")

    def test_b_reward_nonpositive(self, mini_scenario):
        config, profiles = mini_scenario
        env = ChargingEnv(config, profiles)
        rng = np.random.default_rng(0)
        steps = 0
        worst = -np.inf
        episode = 0
        while steps < 10_000:
            env.reset(episode)
            episode += 1
            while not env.done:
                _, reward, _, _ = env.step(rng.uniform(-1, 1, MINI_PORTS))
                worst = max(worst, reward)
                steps += 1
        _record(8, "reward non-positive over 10k random steps (8b)", worst <= 1e-12, f"max {worst:.2e}")

    def test_c_trained_policy_beats_baselines(self, mini_scenario):
        config, profiles = mini_scenario
        env = ChargingEnv(config, profiles)
        result = train_agent(env, SacConfig(), seed=7)
        policy = PolicyController(result.policy)
        eval_seeds = list(range(30_000, 30_030))

        policy_rewards, policy_co2 = [], 0.0
        random_rewards, afap_co2 = [], 0.0
        for seed in eval_seeds:
            row = run_episode(config, profiles, policy, seed, strategy_name="sac")
            policy_rewards.append(row.total_reward)
            policy_co2 += row.co2_kg
            row = run_episode(config, profiles, RandomController(seed), seed, strategy_name="random")
            random_rewards.append(row.total_reward)
            row = run_episode(
                config, profiles, make_controller("afap", config), seed, strategy_name="afap"
            )
            afap_co2 += row.co2_kg
        reward_ok = float(np.mean(policy_rewards)) > float(np.mean(random_rewards))
        co2_ok = policy_co2 < afap_co2
        _record(
            8,
            "trained policy beats random reward and AFAP CO2 (8c)",
            reward_ok and co2_ok,
            f"reward {np.mean(policy_rewards):.0f} vs random {np.mean(random_rewards):.0f}; "
            f"CO2 {policy_co2:.1f} vs AFAP {afap_co2:.1f} kg",
        )

    def test_d_gradient_check(self):
        config = default_config(n_ports=2)
        profiles = build_scenario_profiles(config, MINI_PENETRATION)
        env = ChargingEnv(config, profiles, horizon=4)
        trainer = SacTrainer(env, SacConfig(hidden=(16, 16), batch_size=16), seed=1)
        rng = np.random.default_rng(1)
        obs = env.reset(0)
        for _ in range(120):
            action = rng.uniform(-1, 1, 2)
            nobs, reward, done, _ = env.step(action)
            trainer.buffer.add(obs, action, reward, nobs, done)
            obs = env.reset(1) if done else nobs
        torch.manual_seed(0)
        fraction = gradient_check(trainer, trainer.buffer.sample(16), rel_tol=1e-4)
        _record(8, "gradient finite-difference check (8d)", fraction >= 0.95, f"matched {fraction:.3f}")


class TestCriterion9Determinism:
    def test_benchmark_reports_byte_identical(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(
            json.dumps(
                {
                    "scenario": {"n_ports": 3, "transformer_capacity_kw": 8.0},
                    "penetration": {"target_fraction": 0.5, "source_mix": "wind"},
                }
            )
        )
        payloads = []
        for name in ("one", "two"):
            out = tmp_path / name
            proc = subprocess.run(
                [
                    sys.executable,
                    "-m",
                    "gridcharge.cli",
                    "--config",
                    str(config_path),
                    "--seed",
                    "77",
                    "--runs",
                    "3",
                    "--out",
                    str(out),
                    "benchmark",
                    "--strategies",
                    "afap",
                    "alap",
                    "rr",
                ],
                capture_output=True,
                text=True,
            )
            assert proc.returncode == 0, proc.stderr
            payloads.append((out / "report.csv").read_bytes())
        ok = payloads[0] == payloads[1]
        _record(9, "seeded reports byte-identical", ok, f"{len(payloads[0])} bytes")


class TestCriterion10AblationWiring:
    def test_reward_ablation_variants(self):
        config = default_config(n_ports=4)
        spec = SweepSpec(
            axis="reward_ablation",
            scenarios=(DEFAULT_SCENARIOS[4],),  # hybrid_50
            n_runs=6,
            base_seed=500,
            rl_train_steps=4000,
            rl_seed=7,
        )
        result = sweep(spec, config)
        expected = {"full", "no_carbon", "no_satisfaction", "no_discharge"}
        variants_ok = set(result.matrices) == expected
        discharged = {
            variant: sum(r.discharged_kwh for r in rows)
            for variant, rows in result.matrices.items()
        }
        direction_ok = discharged["no_discharge"] > discharged["full"]
        _record(
            10,
            "reward-ablation wiring",
            variants_ok and direction_ok,
            f"discharged full {discharged.get('full', float('nan')):.1f} vs "
            f"no_discharge {discharged.get('no_discharge', float('nan')):.1f} kWh",
        )
