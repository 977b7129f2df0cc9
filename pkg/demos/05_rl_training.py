"""Train the soft actor-critic agent on a small site and inspect what it learned.

A short demonstration run (5,000 steps, a couple of minutes on CPU); the
benchmark-grade budget is 100k steps via `SacConfig()` or the CLI's
`gridcharge train`.  After training, the deterministic policy is compared
against the random and AFAP baselines on fresh paired seeds.
"""

from gridcharge import PenetrationSpec, SourceMix, default_config
from gridcharge.bench import build_scenario_profiles, make_controller, run_episode
from gridcharge.rl.env import ChargingEnv
from gridcharge.rl.policy import PolicyController, RandomController
from gridcharge.rl.sac import SacConfig, train_agent

config = default_config(n_ports=5)
profiles = build_scenario_profiles(config, PenetrationSpec(0.5, SourceMix.HYBRID))
env = ChargingEnv(config, profiles)

sac_config = SacConfig(total_steps=5_000, eval_every=1_000, warmup_steps=500)
result = train_agent(env, sac_config, seed=7)
print("eval-reward trajectory:")
for step, actor_loss, critic_loss, eval_reward in result.log_rows:
    print(f"  step {step:6d}  eval mean reward {eval_reward:10.0f}")

seeds = range(9_000, 9_010)
totals = {"sac": 0.0, "random": 0.0, "afap": 0.0}
co2 = dict(totals)
for seed in seeds:
    for name, controller in (
        ("sac", PolicyController(result.policy)),
        ("random", RandomController(seed)),
        ("afap", make_controller("afap", config)),
    ):
        row = run_episode(config, profiles, controller, seed, strategy_name=name)
        totals[name] += row.total_reward
        co2[name] += row.co2_kg

print("\npaired comparison over 10 fresh seeds:")
for name in totals:
    print(f"  {name:7s} mean reward {totals[name] / 10:10.0f}   total CO2 {co2[name]:6.1f} kg")
