"""gridcharge: carbon-aware EV charging simulation and benchmarking.

A discrete-time model of a workplace charging site (EVSE ports, station
current limits, transformer with demand response, behind-the-meter solar
and wind) with per-step emissions accounting, six heuristic controllers,
two emission-aware receding-horizon optimizers, and a soft actor-critic
agent trained against a multi-objective reward.
"""

from .emissions import (
    EmissionLedger,
    carbon_intensity_metric,
    re_self_consumption,
    step_emission,
)
from .engine import (
    EvState,
    PortCommand,
    SimState,
    Simulator,
    SiteTopology,
    StepResult,
    ev_grid_import,
    evse_power,
    map_action,
    normalize_station_currents,
    site_balance,
    soc_step,
    transformer_overload,
)
from .profiles import (
    ForecastWindow,
    PenetrationSpec,
    ProfileBundle,
    SourceMix,
    TimeSeries,
    Unit,
    forecast_window,
    load_series,
    penetration_multiplier,
    resample_to_grid,
)
from .scenario import (
    DemandLevel,
    EvSession,
    ScenarioConfig,
    SessionPlan,
    default_config,
    generate_sessions,
    validate_config,
)

__version__ = "0.1.0"

__all__ = [
    "TimeSeries",
    "Unit",
    "PenetrationSpec",
    "SourceMix",
    "ForecastWindow",
    "ProfileBundle",
    "load_series",
    "resample_to_grid",
    "penetration_multiplier",
    "forecast_window",
    "EvSession",
    "ScenarioConfig",
    "SessionPlan",
    "DemandLevel",
    "generate_sessions",
    "validate_config",
    "default_config",
    "SiteTopology",
    "Simulator",
    "SimState",
    "StepResult",
    "EvState",
    "PortCommand",
    "evse_power",
    "map_action",
    "normalize_station_currents",
    "soc_step",
    "site_balance",
    "transformer_overload",
    "ev_grid_import",
    "EmissionLedger",
    "step_emission",
    "carbon_intensity_metric",
    "re_self_consumption",
]
