"""Exogenous signals: the day's profiles and renewable penetration scaling.

Builds the default synthetic day (carbon intensity, solar, wind, office
load), scales renewables to a 50% wind target, and prints a compact hourly
table of the signals the simulation consumes.
"""

import numpy as np

from gridcharge import PenetrationSpec, SourceMix, default_config
from gridcharge.bench import build_scenario_profiles, default_baseline_energy

config = default_config()
penetration = PenetrationSpec(target_fraction=0.5, source_mix=SourceMix.WIND)
profiles = build_scenario_profiles(config, penetration)

print(f"site: {config.n_ports} ports, transformer {config.transformer_capacity_kw:.0f} kW")
print(f"baseline daily charging energy (rated): {default_baseline_energy(config):.0f} kWh")
print(f"wind energy after scaling: {profiles.wind.energy_kwh():.1f} kWh/day\n")

print("hour   CI g/kWh   wind kW   solar kW   office kW")
for t in range(0, config.episode_steps, 8):  # every 2 hours
    hour = config.hour_of_step(t)
    print(
        f"{hour:5.0f} {1000 * profiles.carbon_intensity.value_at(t):10.0f}"
        f" {profiles.wind.value_at(t):9.0f} {profiles.solar.value_at(t):10.0f}"
        f" {profiles.inflexible.value_at(t):11.0f}"
    )

# The scaling invariant: wind daily energy == target share of the baseline.
target = penetration.target_fraction * default_baseline_energy(config)
assert np.isclose(profiles.wind.energy_kwh(), target, rtol=1e-9)
print(f"\nscaling invariant holds: {profiles.wind.energy_kwh():.3f} == {target:.3f} kWh")
