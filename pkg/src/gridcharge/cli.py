"""Command-line interface.

Subcommands: ``simulate`` (one episode with a trace), ``benchmark``
(scenario x strategy matrix), ``train`` (SAC), ``evaluate`` (policy
rollouts), ``sweep`` (sensitivity axes), ``validate`` (config check).

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import bench
from .bench import (
    ALL_STRATEGIES,
    DEFAULT_SCENARIOS,
    HEURISTIC_STRATEGIES,
    ConfigError,
    MatrixResult,
    SweepSpec,
    build_scenario_profiles,
    make_controller,
    run_episode,
    run_matrix,
    sweep,
    write_report_csv,
    write_report_json,
    write_timings_csv,
)
from .profiles import PenetrationSpec, SourceMix, Unit, load_series
from .rl.env import ChargingEnv, RewardWeights
from .rl.policy import load_policy, save_policy
from .rl.sac import SacConfig, evaluate_policy, train_agent
from .scenario import DemandLevel, ScenarioConfig, validate_config

logger = logging.getLogger(__name__)

SCENARIO_NAMES = {name: spec for name, spec in DEFAULT_SCENARIOS}


def load_run_config(path: str | None) -> dict:
    """Merge a JSON config file over the built-in defaults."""
    merged: dict = {
        "scenario": {},
        "profiles": {},
        "penetration": {"target_fraction": 0.0, "source_mix": "hybrid", "hybrid_split": 0.5},
        "strategy": "afap",
        "strategies": list(HEURISTIC_STRATEGIES),
        "scenarios": [name for name, _ in DEFAULT_SCENARIOS],
        "reward": {},
        "heuristic": {},
        "mpc": {},
        "train": {},
    }
    if path:
        file_path = Path(path)
        if not file_path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            user = json.loads(file_path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        for key, value in user.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key].update(value)
            else:
                merged[key] = value
    return merged


def scenario_config_from(run_config: dict) -> ScenarioConfig:
    raw = dict(run_config.get("scenario", {}))
    if "demand_level" in raw:
        try:
            raw["demand_level"] = DemandLevel(raw["demand_level"])
        except ValueError as exc:
            raise ConfigError(f"scenario.demand_level: {exc}") from exc
    if "arrival_rate_table" in raw:
        raw["arrival_rate_table"] = tuple(float(v) for v in raw["arrival_rate_table"])
    try:
        config = ScenarioConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"scenario config: {exc}") from exc
    violations = validate_config(config)
    if violations:
        raise ConfigError("invalid scenario config:\n  " + "\n  ".join(violations))
    return config


def penetration_from(run_config: dict) -> PenetrationSpec:
    raw = run_config.get("penetration", {})
    try:
        return PenetrationSpec(
            target_fraction=float(raw.get("target_fraction", 0.0)),
            source_mix=SourceMix(raw.get("source_mix", "hybrid")),
            hybrid_split=float(raw.get("hybrid_split", 0.5)),
        )
    except ValueError as exc:
        raise ConfigError(f"penetration: {exc}") from exc


def reward_weights_from(run_config: dict) -> RewardWeights:
    raw = dict(run_config.get("reward", {}))
    raw.pop("net_export_credit", None)
    try:
        return replace(RewardWeights(), **raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"reward: {exc}") from exc


def profile_overrides_from(run_config: dict, config: ScenarioConfig) -> dict:
    raw = run_config.get("profiles", {})
    units = {
        "carbon_intensity": Unit.G_PER_KWH,
        "solar": Unit.KW,
        "wind": Unit.KW,
        "inflexible": Unit.KW,
        "dr_reduction": Unit.KW,
        "setpoint": Unit.KW,
    }
    overrides = {}
    for name, unit in units.items():
        path = raw.get(name)
        if path:
            overrides[name] = load_series(path, unit, config.step_hours)
    setpoint_path = run_config.get("mpc", {}).get("setpoint")
    if setpoint_path and "setpoint" not in overrides:
        overrides["setpoint"] = load_series(setpoint_path, Unit.KW, config.step_hours)
    return overrides


def scenarios_from(run_config: dict) -> tuple[tuple[str, PenetrationSpec], ...]:
    names = run_config.get("scenarios", [name for name, _ in DEFAULT_SCENARIOS])
    out = []
    for name in names:
        if name not in SCENARIO_NAMES:
            raise ConfigError(f"unknown scenario name {name!r}; known: {sorted(SCENARIO_NAMES)}")
        out.append((name, SCENARIO_NAMES[name]))
    return tuple(out)


def _strategy_options(run_config: dict, args) -> dict[str, dict]:
    # explicit nulls in the config mean "use the built-in default"
    heuristic = {k: v for k, v in run_config.get("heuristic", {}).items() if v is not None}
    mpc_block = {
        k: v
        for k, v in run_config.get("mpc", {}).items()
        if k not in ("mode", "setpoint") and v is not None
    }
    options: dict[str, dict] = {}
    for name in HEURISTIC_STRATEGIES:
        options[name] = dict(heuristic)
    for name in ("mpc_g2v", "mpc_v2g"):
        options[name] = dict(mpc_block)
    sac_options = {}
    if getattr(args, "policy", None):
        sac_options["policy_path"] = args.policy
    options["sac"] = sac_options
    return options


def _out_dir(args) -> Path:
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    run_config = load_run_config(args.config)
    scenario_config_from(run_config)
    penetration_from(run_config)
    reward_weights_from(run_config)
    print("configuration ok")
    return 0


def cmd_simulate(args) -> int:
    run_config = load_run_config(args.config)
    config = scenario_config_from(run_config)
    penetration = penetration_from(run_config)
    weights = reward_weights_from(run_config)
    overrides = profile_overrides_from(run_config, config)
    baseline = run_config.get("profiles", {}).get("baseline_daily_charging_energy")
    profiles = build_scenario_profiles(config, penetration, baseline, overrides)
    strategy = args.strategy or run_config.get("strategy", "afap")
    options = _strategy_options(run_config, args).get(strategy)
    controller = make_controller(strategy, config, options)
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else config.seed
    trace_path = out / f"trace_{strategy}_{seed}.csv" if args.trace else None
    row = run_episode(
        config,
        profiles,
        controller,
        seed,
        weights=weights,
        scenario_name="simulate",
        strategy_name=strategy,
        net_export_credit=bool(run_config.get("reward", {}).get("net_export_credit", False)),
        trace_path=trace_path,
    )
    write_report_csv([row], out / "report.csv")
    write_report_json([row], out / "report.json")
    write_timings_csv([row], out / "timings.csv")
    sat = "NA" if row.satisfaction_pct is None else f"{row.satisfaction_pct:.2f}%"
    ci = "NA" if row.ci_g_per_kwh is None else f"{row.ci_g_per_kwh:.2f} g/kWh"
    print(
        f"{strategy} seed={seed}: co2={row.co2_kg:.2f} kg, ci={ci}, sat={sat}, "
        f"overload={row.overload_kwh:.2f} kWh, charged={row.charged_kwh:.2f} kWh"
    )
    if trace_path:
        print(f"trace written to {trace_path}")
    return 0


def _write_matrix_outputs(result: MatrixResult, out: Path) -> None:
    write_report_csv(result.rows, out / "report.csv")
    write_report_json(result.rows, out / "report.json")
    write_timings_csv(result.rows, out / "timings.csv")
    if result.errors:
        with open(out / "errors.csv", "w") as fh:
            fh.write("scenario,strategy,seed,error\n")
            for scenario, strategy, seed, message in result.errors:
                fh.write(f"{scenario},{strategy},{seed},{message!r}\n")


def cmd_benchmark(args) -> int:
    run_config = load_run_config(args.config)
    config = scenario_config_from(run_config)
    weights = reward_weights_from(run_config)
    scenarios = scenarios_from(run_config)
    strategies = tuple(args.strategies or run_config.get("strategies", HEURISTIC_STRATEGIES))
    unknown = [s for s in strategies if s not in ALL_STRATEGIES + ("random", "zero")]
    if unknown:
        raise ConfigError(f"unknown strategies: {unknown}")
    out = _out_dir(args)
    result = run_matrix(
        config,
        scenarios=scenarios,
        strategies=strategies,
        n_runs=args.runs or 10,
        base_seed=args.seed if args.seed is not None else 1000,
        weights=weights,
        strategy_options=_strategy_options(run_config, args),
        baseline_daily_charging_energy=run_config.get("profiles", {}).get(
            "baseline_daily_charging_energy"
        ),
        net_export_credit=bool(run_config.get("reward", {}).get("net_export_credit", False)),
        workers=args.workers or 1,
        trace_dir=out if args.trace else None,
        profile_overrides=profile_overrides_from(run_config, config),
    )
    _write_matrix_outputs(result, out)
    print(f"{len(result.rows)} rows -> {out / 'report.csv'}")
    if result.errors:
        print(f"{len(result.errors)} failed episodes recorded in {out / 'errors.csv'}")
    return 0 if not result.errors else 3


def cmd_train(args) -> int:
    run_config = load_run_config(args.config)
    config = scenario_config_from(run_config)
    penetration = penetration_from(run_config)
    weights = reward_weights_from(run_config)
    baseline = run_config.get("profiles", {}).get("baseline_daily_charging_energy")
    profiles = build_scenario_profiles(
        config, penetration, baseline, profile_overrides_from(run_config, config)
    )
    out = _out_dir(args)
    train_block = dict(run_config.get("train", {}))
    if args.steps:
        train_block["total_steps"] = args.steps
    train_block.setdefault("checkpoint_dir", str(out / "checkpoints"))
    train_block.setdefault("log_path", str(out / "training_log.csv"))
    try:
        sac_config = SacConfig(**{k: tuple(v) if k == "hidden" else v for k, v in train_block.items()})
    except TypeError as exc:
        raise ConfigError(f"train: {exc}") from exc
    env = ChargingEnv(config, profiles, weights)
    seed = args.seed if args.seed is not None else config.seed
    result = train_agent(env, sac_config, seed)
    policy_path = out / "policy.npz"
    save_policy(result.policy, policy_path)
    print(
        f"trained {sac_config.total_steps} steps (seed {seed}); best eval reward "
        f"{result.best_eval_reward:.2f}; policy -> {policy_path}"
    )
    return 0


def cmd_evaluate(args) -> int:
    run_config = load_run_config(args.config)
    config = scenario_config_from(run_config)
    penetration = penetration_from(run_config)
    weights = reward_weights_from(run_config)
    baseline = run_config.get("profiles", {}).get("baseline_daily_charging_energy")
    profiles = build_scenario_profiles(
        config, penetration, baseline, profile_overrides_from(run_config, config)
    )
    if not args.policy:
        raise ConfigError("evaluate needs --policy <path>")
    policy = load_policy(args.policy)
    base_seed = args.seed if args.seed is not None else 1000
    seeds = [base_seed + i for i in range(args.runs or 10)]
    rows = evaluate_policy(policy, config, profiles, seeds, weights=weights)
    out = _out_dir(args)
    write_report_csv(rows, out / "report.csv")
    write_report_json(rows, out / "report.json")
    write_timings_csv(rows, out / "timings.csv")
    print(f"{len(rows)} evaluation rows -> {out / 'report.csv'}")
    return 0


def cmd_sweep(args) -> int:
    run_config = load_run_config(args.config)
    config = scenario_config_from(run_config)
    spec = SweepSpec(
        axis=args.axis,
        values=tuple(args.values) if args.values else None,
        strategies=tuple(run_config.get("strategies", HEURISTIC_STRATEGIES)),
        n_runs=args.runs or 10,
        base_seed=args.seed if args.seed is not None else 1000,
        rl_train_steps=args.train_steps,
    )
    result = sweep(spec, config)
    out = _out_dir(args)
    for value, rows in result.matrices.items():
        write_report_csv(rows, out / f"report_{result.axis}_{value}.csv")
    with open(out / "deltas.csv", "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(
            ["axis_value", "scenario", "strategy", "metric", "baseline_mean", "value_mean", "delta"]
        )
        for row in result.deltas:
            writer.writerow(
                [
                    row["axis_value"],
                    row["scenario"],
                    row["strategy"],
                    row["metric"],
                    f"{row['baseline_mean']:.6f}",
                    f"{row['value_mean']:.6f}",
                    f"{row['delta']:.6f}",
                ]
            )
    print(f"sweep '{result.axis}' ({len(result.matrices)} values) -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridcharge", description=__doc__)
    parser.add_argument("--config", help="JSON run configuration file")
    parser.add_argument("--seed", type=int, help="base seed")
    parser.add_argument("--out", help="output directory (default: ./out)")
    parser.add_argument("--runs", type=int, help="runs per cell")
    parser.add_argument("--workers", type=int, help="parallel episode workers")
    parser.add_argument("--trace", action="store_true", help="write per-step trace CSVs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one episode")
    p.add_argument("--strategy", help="strategy name")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="run the scenario x strategy matrix")
    p.add_argument("--strategies", nargs="*", help="subset of strategies")
    p.add_argument("--policy", help="policy artifact for the 'sac' strategy")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("train", help="train the SAC agent")
    p.add_argument("--steps", type=int, help="total training steps")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="roll out a trained policy")
    p.add_argument("--policy", required=True, help="policy artifact path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="sensitivity sweeps")
    p.add_argument("--axis", required=True, choices=list(bench.SWEEP_AXES))
    p.add_argument("--values", nargs="*", help="axis values (axis-specific)")
    p.add_argument("--train-steps", type=int, default=20_000, dest="train_steps")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check the run configuration")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.exception("run failed")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
