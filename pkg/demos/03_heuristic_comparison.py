"""All six heuristics on paired seeds: the satisfaction / grid-stress trade-off.

Same five runs for every strategy (common random numbers), one scenario
without renewables and one with 50% wind.  AFAP tops satisfaction but
stresses the transformer; ALAP and RR trade fulfilment for grid relief;
under strong wind, emissions collapse for every rule.
"""

from gridcharge import default_config
from gridcharge.bench import (
    DEFAULT_SCENARIOS,
    HEURISTIC_STRATEGIES,
    aggregate_runs,
    run_matrix,
)

config = default_config()
result = run_matrix(
    config,
    scenarios=(DEFAULT_SCENARIOS[0], DEFAULT_SCENARIOS[2]),  # no_re, wind_50
    strategies=HEURISTIC_STRATEGIES,
    n_runs=5,
    base_seed=1000,
)

print(f"{len(result.rows)} episodes ({len(result.errors)} failures)\n")
print("scenario   strategy    sat %      CO2 kg     overload kWh")
groups: dict[tuple[str, str], list] = {}
for row in result.rows:
    groups.setdefault((row.scenario, row.strategy), []).append(row)
for (scenario, strategy), rows in sorted(groups.items()):
    stats = aggregate_runs(rows)
    print(
        f"{scenario:10s} {strategy:10s}"
        f" {stats.mean['satisfaction_pct']:6.1f}±{stats.std['satisfaction_pct']:<5.1f}"
        f" {stats.mean['co2_kg']:6.1f}±{stats.std['co2_kg']:<5.1f}"
        f" {stats.mean['overload_kwh']:8.1f}±{stats.std['overload_kwh']:<5.1f}"
    )
