"""One simulated day under AFAP: uncontrolled charging and what it costs.

Rolls a seeded episode step by step, printing the busiest hours and the
end-of-day metrics (emissions, satisfaction, transformer overload).
"""

import numpy as np

from gridcharge import PenetrationSpec, default_config
from gridcharge.bench import build_scenario_profiles, make_controller
from gridcharge.rl.env import ChargingEnv

config = default_config()
profiles = build_scenario_profiles(config, PenetrationSpec(0.0))  # grid only
controller = make_controller("afap", config)

env = ChargingEnv(config, profiles)
env.reset(seed=42)

print("hour  EVs  site kW  overload kW  import kW  CO2 kg")
co2 = 0.0
while not env.done:
    t = env.sim.state.step
    action = controller.act(env.sim, profiles)
    _, _, _, info = env.step(action)
    result = info["step_result"]
    co2 += info["emission_kg"]
    if result.step % 8 == 0:
        n_evs = len(env.sim.connected())
        print(
            f"{config.hour_of_step(result.step):4.0f} {n_evs:4d} {result.site_power_kw:8.1f}"
            f" {result.overload_kw:12.1f} {result.grid_import_ev_kw:10.1f} {co2:7.2f}"
        )

departed = env.sim.departed
satisfaction = 100.0 * np.mean([min(f / t, 1.0) for f, t in departed])
print(f"\n{len(departed)} vehicles served, satisfaction {satisfaction:.1f}%")
print(f"total CO2 {co2:.1f} kg, overload {env.sim.state.cum_overload_kwh:.1f} kWh")
