"""Benchmark harness: metrics, the scenario/strategy matrix, and sweeps.

Runs are paired: within one matrix, run ``k`` uses seed ``base_seed + k``
for every scenario and strategy, so all strategies face identical EV
arrival realizations (common random numbers).
"""

from __future__ import annotations

import csv
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .heuristics import HeuristicController, HeuristicKind, HeuristicSpec
from .mpc import MpcController, MpcMode, MpcSettings
from .profiles import PenetrationSpec, ProfileBundle, SourceMix, build_profile_bundle
from .rl.env import ChargingEnv, RewardWeights
from .rl.policy import PolicyArtifact, PolicyController, RandomController, ZeroController, load_policy
from .scenario import DemandLevel, ScenarioConfig

logger = logging.getLogger(__name__)

HEURISTIC_STRATEGIES = ("afap", "afap_plus", "afap_star", "alap", "fsb", "rr")
ALL_STRATEGIES = HEURISTIC_STRATEGIES + ("mpc_g2v", "mpc_v2g", "sac")

REPORT_COLUMNS = (
    "scenario",
    "strategy",
    "seed",
    "co2_kg",
    "ci_g_per_kwh",
    "satisfaction_pct",
    "overload_kwh",
    "charged_kwh",
    "discharged_kwh",
    "re_ratio",
    "dropped_arrivals",
)

DEFAULT_SCENARIOS: tuple[tuple[str, PenetrationSpec], ...] = (
    ("no_re", PenetrationSpec(0.0, SourceMix.HYBRID)),
    ("solar_50", PenetrationSpec(0.5, SourceMix.SOLAR)),
    ("wind_50", PenetrationSpec(0.5, SourceMix.WIND)),
    ("hybrid_25", PenetrationSpec(0.25, SourceMix.HYBRID)),
    ("hybrid_50", PenetrationSpec(0.5, SourceMix.HYBRID)),
)


class ConfigError(ValueError):
    """Raised for unresolvable strategies or invalid run configuration."""


@dataclass(frozen=True)
class MetricsReport:
    """Per-episode performance metrics for one (scenario, strategy, seed) cell."""

    scenario: str
    strategy: str
    seed: int
    co2_kg: float
    ci_g_per_kwh: float | None
    satisfaction_pct: float | None
    overload_kwh: float
    charged_kwh: float
    discharged_kwh: float
    re_ratio: float
    dropped_arrivals: int
    wall_time_s: float
    total_reward: float = 0.0  # auxiliary; not part of the report columns


def user_satisfaction(departed: list[tuple[float, float]]) -> float | None:
    """Mean capped fulfilment ratio at departure, as a percentage."""
    if not departed:
        return None
    ratios = [min(final / target, 1.0) for final, target in departed]
    return 100.0 * float(np.mean(ratios))


@dataclass(frozen=True)
class AggregateStats:
    scenario: str
    strategy: str
    n_rows: int
    mean: dict[str, float | None]
    std: dict[str, float | None]


_NUMERIC_METRICS = (
    "co2_kg",
    "ci_g_per_kwh",
    "satisfaction_pct",
    "overload_kwh",
    "charged_kwh",
    "discharged_kwh",
    "re_ratio",
    "dropped_arrivals",
)


def aggregate_runs(rows: list[MetricsReport]) -> AggregateStats:
    """Mean and sample standard deviation (n-1) over one (scenario, strategy) group."""
    if not rows:
        raise ConfigError("cannot aggregate an empty group")
    keys = {(r.scenario, r.strategy) for r in rows}
    if len(keys) > 1:
        raise ConfigError(f"mixed scenario/strategy groups: {sorted(keys)}")
    mean: dict[str, float | None] = {}
    std: dict[str, float | None] = {}
    for metric in _NUMERIC_METRICS:
        values = [getattr(r, metric) for r in rows if getattr(r, metric) is not None]
        if not values:
            mean[metric] = None
            std[metric] = None
            continue
        mean[metric] = float(np.mean(values))
        std[metric] = float(statistics.stdev(values)) if len(values) > 1 else 0.0
    scenario, strategy = next(iter(keys))
    return AggregateStats(scenario, strategy, len(rows), mean, std)


# ---------------------------------------------------------------------------
# Controllers and episode execution
# ---------------------------------------------------------------------------


def fsb_default_start_step(config: ScenarioConfig, start_time_hour: float = 10.0) -> int:
    from .profiles import EPISODE_START_HOUR

    return max(0, int(round((start_time_hour - EPISODE_START_HOUR) / config.step_hours)))


def make_controller(name: str, config: ScenarioConfig, options: dict | None = None):
    """Resolve a strategy name into a controller; unknown names are config errors."""
    options = dict(options or {})
    policy = options.pop("policy", None)
    policy_path = options.pop("policy_path", None)
    if name == "afap":
        return HeuristicController(HeuristicSpec(HeuristicKind.AFAP))
    if name == "afap_plus":
        cap = options.get("power_cap_kw", config.transformer_capacity_kw)
        return HeuristicController(HeuristicSpec(HeuristicKind.AFAP_PLUS, power_cap_kw=cap))
    if name == "afap_star":
        stop = options.get("stop_soc", 0.85)
        return HeuristicController(HeuristicSpec(HeuristicKind.AFAP_STAR, stop_soc=stop))
    if name == "alap":
        return HeuristicController(HeuristicSpec(HeuristicKind.ALAP))
    if name == "fsb":
        start = options.get("start_step", fsb_default_start_step(config))
        return HeuristicController(HeuristicSpec(HeuristicKind.FSB, start_step=start))
    if name == "rr":
        return HeuristicController(
            HeuristicSpec(HeuristicKind.RR, rr_budget_kw=options.get("rr_budget_kw"))
        )
    if name in ("mpc_g2v", "mpc_v2g"):
        mode = MpcMode.G2V if name == "mpc_g2v" else MpcMode.V2G
        settings = MpcSettings(
            mode=mode,
            horizon=options.get("horizon", 20),
            lambda_emission=options.get("lambda_emission", 5.0),
            price_charge=options.get("price_charge", 0.25),
            price_discharge=options.get("price_discharge", 0.15),
        )
        return MpcController(settings)
    if name == "sac":
        if policy is None:
            if policy_path is None:
                raise ConfigError("strategy 'sac' needs a policy or policy_path option")
            policy = load_policy(policy_path)
        if not isinstance(policy, PolicyArtifact):
            raise ConfigError("'policy' option must be a PolicyArtifact")
        return PolicyController(policy)
    if name == "random":
        return RandomController(options.get("seed", 0))
    if name == "zero":
        return ZeroController()
    raise ConfigError(f"unknown strategy name: {name!r}")


TRACE_COLUMNS = (
    "step",
    "site_kw",
    "grid_import_kw",
    "overload_kw",
    "curtailed_kw",
    "served_kwh",
    "discharged_kwh",
    "co2_kg",
)


def run_episode(
    config: ScenarioConfig,
    profiles: ProfileBundle,
    controller,
    seed: int,
    weights: RewardWeights = RewardWeights(),
    scenario_name: str = "scenario",
    strategy_name: str = "strategy",
    net_export_credit: bool = False,
    trace_path: str | Path | None = None,
) -> MetricsReport:
    """Roll one seeded episode under a controller and collect its metrics."""
    started = time.perf_counter()
    env = ChargingEnv(config, profiles, weights, net_export_credit=net_export_credit)
    env.reset(seed)
    dt = config.step_hours

    co2_kg = 0.0
    charged = 0.0
    discharged = 0.0
    overload_kwh = 0.0
    re_available = 0.0
    re_used = 0.0
    total_reward = 0.0
    trace_rows = []
    while not env.done:
        action = controller.act(env.sim, profiles)
        _, reward, _, info = env.step(action)
        result = info["step_result"]
        emission = info["emission_kg"]
        total_reward += reward
        co2_kg += emission
        charged += result.served_kwh
        discharged += result.discharged_kwh
        overload_kwh += result.overload_kw * dt
        re_available += (result.renewables_used_kw + result.curtailed_kw) * dt
        re_used += result.renewables_used_kw * dt
        if trace_path is not None:
            trace_rows.append(
                (
                    result.step,
                    result.site_power_kw,
                    result.grid_import_ev_kw,
                    result.overload_kw,
                    result.curtailed_kw,
                    result.served_kwh,
                    result.discharged_kwh,
                    emission,
                )
            )

    if trace_path is not None:
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for row in trace_rows:
                writer.writerow([row[0]] + [f"{v:.6f}" for v in row[1:]])

    ci = 1000.0 * co2_kg / charged if charged > 0 else None
    return MetricsReport(
        scenario=scenario_name,
        strategy=strategy_name,
        seed=seed,
        co2_kg=co2_kg,
        ci_g_per_kwh=ci,
        satisfaction_pct=user_satisfaction(env.sim.departed),
        overload_kwh=overload_kwh,
        charged_kwh=charged,
        discharged_kwh=discharged,
        re_ratio=re_used / re_available if re_available > 1e-12 else 0.0,
        dropped_arrivals=env.dropped_arrivals,
        wall_time_s=time.perf_counter() - started,
        total_reward=total_reward,
    )


def default_baseline_energy(config: ScenarioConfig) -> float:
    """Nominal daily charging energy of the installed ports, in kWh.

    The penetration targets are expressed against this rated-throughput
    basis so a 50% renewable case clearly blankets typical actual demand.
    """
    return config.n_ports * config.evse_max_charge_kw * 24.0


def build_scenario_profiles(
    config: ScenarioConfig,
    penetration: PenetrationSpec,
    baseline_daily_charging_energy: float | None = None,
    overrides: dict | None = None,
) -> ProfileBundle:
    baseline = (
        baseline_daily_charging_energy
        if baseline_daily_charging_energy is not None
        else default_baseline_energy(config)
    )
    return build_profile_bundle(
        config.episode_steps,
        config.step_hours,
        penetration,
        baseline,
        config.transformer_capacity_kw,
        n_ports=config.n_ports,
        overrides=overrides,
    )


@dataclass
class MatrixResult:
    rows: list[MetricsReport]
    errors: list[tuple[str, str, int, str]] = field(default_factory=list)  # cell id + message


def _run_cell(args) -> tuple[tuple[str, str, int], MetricsReport | None, str | None]:
    (
        config,
        scenario_name,
        penetration,
        strategy,
        options,
        seed,
        weights,
        baseline_energy,
        net_export_credit,
        trace_path,
        profile_overrides,
    ) = args
    key = (scenario_name, strategy, seed)
    try:
        profiles = build_scenario_profiles(config, penetration, baseline_energy, profile_overrides)
        controller = make_controller(strategy, config, options)
        row = run_episode(
            config,
            profiles,
            controller,
            seed,
            weights=weights,
            scenario_name=scenario_name,
            strategy_name=strategy,
            net_export_credit=net_export_credit,
            trace_path=trace_path,
        )
        return key, row, None
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001 - failed episodes must not kill the matrix
        return key, None, f"{type(exc).__name__}: {exc}"


def run_matrix(
    config: ScenarioConfig,
    scenarios: tuple[tuple[str, PenetrationSpec], ...] = DEFAULT_SCENARIOS,
    strategies: tuple[str, ...] = HEURISTIC_STRATEGIES,
    n_runs: int = 10,
    base_seed: int = 1000,
    weights: RewardWeights = RewardWeights(),
    strategy_options: dict[str, dict] | None = None,
    baseline_daily_charging_energy: float | None = None,
    net_export_credit: bool = False,
    workers: int = 1,
    trace_dir: str | Path | None = None,
    profile_overrides: dict | None = None,
) -> MatrixResult:
    """Run every scenario x strategy x run cell with paired seeds.

    Failed episodes are recorded as errors and skipped; unknown strategy
    names fail fast before any episode runs.
    """
    strategy_options = strategy_options or {}
    for strategy in strategies:  # fail fast on unresolvable strategies
        make_controller(strategy, config, strategy_options.get(strategy))

    cells = []
    for scenario_name, penetration in scenarios:
        for strategy in strategies:
            for k in range(n_runs):
                seed = base_seed + k
                trace_path = None
                if trace_dir is not None:
                    trace_path = (
                        Path(trace_dir) / f"trace_{scenario_name}_{strategy}_{seed}.csv"
                    )
                cells.append(
                    (
                        config,
                        scenario_name,
                        penetration,
                        strategy,
                        strategy_options.get(strategy),
                        seed,
                        weights,
                        baseline_daily_charging_energy,
                        net_export_credit,
                        trace_path,
                        profile_overrides,
                    )
                )

    result = MatrixResult(rows=[])
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(cell) for cell in cells]
    for key, row, error in outcomes:
        if error is not None:
            logger.error("episode %s failed: %s", key, error)
            result.errors.append((*key, error))
        else:
            result.rows.append(row)
    result.rows.sort(key=lambda r: (r.scenario, r.strategy, r.seed))
    return result


# ---------------------------------------------------------------------------
# Sensitivity sweeps
# ---------------------------------------------------------------------------

SWEEP_AXES = ("reward_ablation", "w_co2", "penetration", "demand")

REWARD_ABLATION_VARIANTS: tuple[tuple[str, dict], ...] = (
    ("full", {}),
    ("no_carbon", {"w_co2": 0.0}),
    ("no_satisfaction", {"w_satisfaction": 0.0}),
    ("no_discharge", {"w_discharge": 0.0}),
)


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple | None = None
    scenarios: tuple[tuple[str, PenetrationSpec], ...] = (DEFAULT_SCENARIOS[4],)
    strategies: tuple[str, ...] = HEURISTIC_STRATEGIES
    n_runs: int = 10
    base_seed: int = 1000
    rl_train_steps: int = 20_000
    rl_seed: int = 7
    penetration_mix: SourceMix = SourceMix.WIND

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis: {self.axis!r} (one of {SWEEP_AXES})")


@dataclass
class SweepResult:
    axis: str
    baseline_value: str
    matrices: dict[str, list[MetricsReport]]
    deltas: list[dict]


def _train_policy_for_weights(
    config: ScenarioConfig, scenario: tuple[str, PenetrationSpec], weights: RewardWeights,
    total_steps: int, seed: int,
) -> PolicyArtifact:
    from .rl.sac import SacConfig, train_agent

    profiles = build_scenario_profiles(config, scenario[1])
    env = ChargingEnv(config, profiles, weights)
    sac_config = SacConfig(total_steps=total_steps, eval_every=max(1000, total_steps // 4))
    return train_agent(env, sac_config, seed).policy


def sweep(spec: SweepSpec, config: ScenarioConfig) -> SweepResult:
    """Run one sensitivity axis; emits a matrix per value plus deltas vs baseline."""
    matrices: dict[str, list[MetricsReport]] = {}

    if spec.axis == "reward_ablation":
        baseline_value = "full"
        for variant, overrides in REWARD_ABLATION_VARIANTS:
            weights = replace(RewardWeights(), **overrides)
            policy = _train_policy_for_weights(
                config, spec.scenarios[0], weights, spec.rl_train_steps, spec.rl_seed
            )
            result = run_matrix(
                config,
                scenarios=spec.scenarios,
                strategies=("sac",),
                n_runs=spec.n_runs,
                base_seed=spec.base_seed,
                weights=weights,
                strategy_options={"sac": {"policy": policy}},
            )
            matrices[variant] = result.rows
    elif spec.axis == "w_co2":
        values = spec.values or (1.0, 3.0, 5.0, 10.0)
        baseline_value = "5.0"
        for w in values:
            weights = replace(RewardWeights(), w_co2=float(w))
            policy = _train_policy_for_weights(
                config, spec.scenarios[0], weights, spec.rl_train_steps, spec.rl_seed
            )
            result = run_matrix(
                config,
                scenarios=spec.scenarios,
                strategies=("sac",),
                n_runs=spec.n_runs,
                base_seed=spec.base_seed,
                weights=weights,
                strategy_options={"sac": {"policy": policy}},
            )
            matrices[str(float(w))] = result.rows
        if baseline_value not in matrices:
            baseline_value = next(iter(matrices))
    elif spec.axis == "penetration":
        values = spec.values or (0.0, 0.25, 0.5, 0.75)
        baseline_value = str(float(values[0]))
        for fraction in values:
            pen = PenetrationSpec(float(fraction), spec.penetration_mix)
            result = run_matrix(
                config,
                scenarios=(("penetration", pen),),
                strategies=spec.strategies,
                n_runs=spec.n_runs,
                base_seed=spec.base_seed,
            )
            matrices[str(float(fraction))] = result.rows
    else:  # demand
        values = spec.values or (DemandLevel.LOW, DemandLevel.MEDIUM, DemandLevel.HIGH)
        baseline_value = DemandLevel.MEDIUM.value
        for level in values:
            level = DemandLevel(level)
            level_config = replace(config, demand_level=level)
            result = run_matrix(
                level_config,
                scenarios=spec.scenarios,
                strategies=spec.strategies,
                n_runs=spec.n_runs,
                base_seed=spec.base_seed,
            )
            matrices[level.value] = result.rows
        if baseline_value not in matrices:
            baseline_value = next(iter(matrices))

    deltas = _delta_table(matrices, baseline_value)
    return SweepResult(spec.axis, baseline_value, matrices, deltas)


def _delta_table(matrices: dict[str, list[MetricsReport]], baseline_value: str) -> list[dict]:
    def grouped(rows):
        groups: dict[tuple[str, str], list[MetricsReport]] = {}
        for row in rows:
            groups.setdefault((row.scenario, row.strategy), []).append(row)
        return {key: aggregate_runs(group) for key, group in groups.items()}

    base_stats = grouped(matrices.get(baseline_value, []))
    deltas: list[dict] = []
    for value, rows in matrices.items():
        if value == baseline_value:
            continue
        for key, stats in grouped(rows).items():
            base = base_stats.get(key)
            for metric in _NUMERIC_METRICS:
                value_mean = stats.mean.get(metric)
                base_mean = base.mean.get(metric) if base else None
                if value_mean is None or base_mean is None:
                    continue
                deltas.append(
                    {
                        "axis_value": value,
                        "scenario": key[0],
                        "strategy": key[1],
                        "metric": metric,
                        "baseline_mean": base_mean,
                        "value_mean": value_mean,
                        "delta": value_mean - base_mean,
                    }
                )
    return deltas


# ---------------------------------------------------------------------------
# Report writers
# ---------------------------------------------------------------------------


def _format_value(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_report_csv(rows: list[MetricsReport], path: str | Path) -> None:
    """Deterministic report CSV; wall time goes to the timings sidecar instead."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([_format_value(getattr(row, col)) for col in REPORT_COLUMNS])


def write_timings_csv(rows: list[MetricsReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("scenario", "strategy", "seed", "wall_time_s"))
        for row in rows:
            writer.writerow((row.scenario, row.strategy, row.seed, f"{row.wall_time_s:.4f}"))


def write_report_json(rows: list[MetricsReport], path: str | Path) -> None:
    """Same data as the CSV, nested scenario -> strategy with mean/std."""
    tree: dict[str, dict[str, dict]] = {}
    groups: dict[tuple[str, str], list[MetricsReport]] = {}
    for row in rows:
        groups.setdefault((row.scenario, row.strategy), []).append(row)
    for (scenario, strategy), group in sorted(groups.items()):
        stats = aggregate_runs(group)
        tree.setdefault(scenario, {})[strategy] = {
            "rows": [
                {col: getattr(r, col) for col in REPORT_COLUMNS if col not in ("scenario", "strategy")}
                for r in group
            ],
            "mean": stats.mean,
            "std": stats.std,
        }
    with open(path, "w") as fh:
        json.dump(tree, fh, indent=2, sort_keys=True)
        fh.write("\n")
