"""The benchmark matrix and a sensitivity sweep, as used for the full study.

Runs a reduced matrix (two scenarios, three heuristics, three paired runs)
and a renewable-penetration sweep, then shows how the same thing is done
from the command line.
"""

from gridcharge import default_config
from gridcharge.bench import (
    DEFAULT_SCENARIOS,
    SweepSpec,
    aggregate_runs,
    run_matrix,
    sweep,
)

config = default_config()

result = run_matrix(
    config,
    scenarios=(DEFAULT_SCENARIOS[0], DEFAULT_SCENARIOS[4]),  # no_re, hybrid_50
    strategies=("afap", "alap", "rr"),
    n_runs=3,
    base_seed=1000,
)
print(f"matrix: {len(result.rows)} rows (2 scenarios x 3 strategies x 3 runs)\n")

groups: dict[tuple[str, str], list] = {}
for row in result.rows:
    groups.setdefault((row.scenario, row.strategy), []).append(row)
for key, rows in sorted(groups.items()):
    stats = aggregate_runs(rows)
    print(
        f"{key[0]:10s} {key[1]:5s}  CO2 {stats.mean['co2_kg']:6.1f} kg"
        f"  sat {stats.mean['satisfaction_pct']:5.1f}%  RE {stats.mean['re_ratio']:.2f}"
    )

print("\npenetration sweep (wind), AFAP emissions vs the 0% baseline:")
spec = SweepSpec(
    axis="penetration", values=(0.0, 0.25, 0.5), strategies=("afap",), n_runs=3, base_seed=1000
)
sweep_result = sweep(spec, config)
for delta in sweep_result.deltas:
    if delta["metric"] == "co2_kg":
        print(
            f"  {delta['axis_value']}: {delta['value_mean']:6.1f} kg"
            f" ({delta['delta']:+.1f} vs baseline)"
        )

print(
    "\nCLI equivalents:\n"
    "  gridcharge --seed 1000 --runs 10 --out out benchmark\n"
    "  gridcharge --seed 1000 --runs 10 --out out sweep --axis penetration\n"
)
