"""Environment contract: state vector, action mapping, reward, episode loop.

The state packs, in order: the step index and last-step total EV power,
per-transformer current load/PV/wind (divided by 100) followed by their
lookahead forecasts (divided by 100), the carbon-intensity forecast
(g/kWh divided by 1000, i.e. kg/kWh), and per-port (SoC, steps to
departure), with (0, 0) for empty ports.

The reward is a weighted sum of three penalties: discharged (plus, by
default, curtailed) energy, emissions of the energy served, and a
satisfaction shortfall for vehicles departing this step.  It is never
positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..emissions import net_grid_energy, step_emission
from ..engine import SimState, Simulator, SiteTopology, StepResult
from ..profiles import ProfileBundle, forecast_window
from ..scenario import ScenarioConfig, generate_sessions

N_TRANSFORMERS = 1  # single-transformer site; the layout generalizes


@dataclass(frozen=True)
class RewardWeights:
    """Penalty weights of the multi-objective reward."""

    w_discharge: float = 50.0
    w_co2: float = 5.0
    w_satisfaction: float = 50.0
    sat_threshold: float = 0.8
    curtailment_in_discharge_term: bool = True

    def __post_init__(self):
        if min(self.w_discharge, self.w_co2, self.w_satisfaction) < 0:
            raise ValueError("reward weights must be non-negative")
        if not 0 < self.sat_threshold <= 1:
            raise ValueError("sat_threshold must lie in (0, 1]")


def state_length(n_transformers: int, horizon: int, n_ports: int) -> int:
    return 2 + n_transformers * (3 + 3 * horizon) + horizon + 2 * n_ports


def build_state(state: SimState, profiles: ProfileBundle, horizon: int) -> np.ndarray:
    """Flatten the observable site state into the fixed-order feature vector."""
    t = min(state.step, profiles.n_steps - 1)
    out: list[float] = [float(t), state.last_total_power_kw]
    for series in (profiles.inflexible, profiles.solar, profiles.wind):
        out.append(series.value_at(t) / 100.0)
    for series in (profiles.inflexible, profiles.solar, profiles.wind):
        window = forecast_window(series, t, horizon)
        out.extend(v / 100.0 for v in window.values)
    ci_window = forecast_window(profiles.carbon_intensity, t, horizon)
    out.extend(ci_window.values)  # canonical kg/kWh == g/kWh divided by 1000
    for ev in state.ev_states:
        if ev is None:
            out.extend((0.0, 0.0))
        else:
            out.append(ev.soc)
            out.append(float(max(ev.session.departure_step - t, 0)))
    return np.asarray(out, dtype=np.float64)


def satisfaction_penalty(s_t: float | None, weights: RewardWeights) -> float:
    """Shortfall penalty for the vehicles departing this step; 0 if none."""
    if s_t is None:
        return 0.0
    if not 0.0 <= s_t <= 1.0:
        raise ValueError("satisfaction must lie in [0, 1]")
    if s_t < weights.sat_threshold:
        # distributed form: exact for representable weight/threshold pairs
        return weights.w_satisfaction * weights.sat_threshold - weights.w_satisfaction * s_t
    return 0.0


def departures_satisfaction(step: StepResult) -> float | None:
    """Mean satisfaction ratio of this step's departures (None when empty)."""
    if not step.departed:
        return None
    ratios = [min(final / target, 1.0) for final, target in step.departed]
    return float(np.mean(ratios))


def compute_reward(
    step: StepResult,
    emission_kg: float,
    s_t: float | None,
    weights: RewardWeights,
) -> float:
    """Weighted penalty sum; non-positive by construction."""
    discharged = step.discharged_kwh
    if weights.curtailment_in_discharge_term:
        discharged += step.curtailed_kwh
    co2_term = weights.w_co2 * (emission_kg / max(step.served_kwh, 0.1)) * step.served_kwh
    return (
        -weights.w_discharge * discharged
        - co2_term
        - satisfaction_penalty(s_t, weights)
    )


class ChargingEnv:
    """Gym-like episode loop over the site simulator.

    ``reset(seed)`` regenerates the EV sessions for that seed and returns
    the initial state; ``step(action)`` returns
    ``(state, reward, done, info)`` where ``info`` carries the raw
    :class:`StepResult`, the step emission, and the departure satisfaction.
    """

    def __init__(
        self,
        config: ScenarioConfig,
        profiles: ProfileBundle,
        weights: RewardWeights = RewardWeights(),
        horizon: int = 20,
        net_export_credit: bool = False,
        station_aggregate_kw: float | None = None,
    ):
        self.config = config
        self.profiles = profiles
        self.weights = weights
        self.horizon = horizon
        self.net_export_credit = net_export_credit
        self.station_aggregate_kw = station_aggregate_kw
        self.topology = SiteTopology.from_config(config, station_aggregate_kw)
        self.sim: Simulator | None = None
        self.dropped_arrivals = 0

    @property
    def n_ports(self) -> int:
        return self.config.n_ports

    @property
    def state_dim(self) -> int:
        return state_length(N_TRANSFORMERS, self.horizon, self.config.n_ports)

    def reset(self, seed: int) -> np.ndarray:
        plan = generate_sessions(self.config, seed)
        self.dropped_arrivals = plan.dropped_arrivals
        self.sim = Simulator(
            self.topology, plan.sessions, self.profiles, self.config.episode_steps
        )
        return build_state(self.sim.state, self.profiles, self.horizon)

    @property
    def done(self) -> bool:
        return self.sim is None or self.sim.done

    def step(self, action: np.ndarray) -> tuple[np.ndarray, float, bool, dict]:
        if self.sim is None:
            raise RuntimeError("call reset() before step()")
        action = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        t = self.sim.state.step
        result = self.sim.step(action)
        intensity = self.profiles.carbon_intensity.value_at(t)
        grid_kwh = net_grid_energy(
            result.grid_import_ev_kw * result.step_hours,
            result.discharged_kwh,
            self.net_export_credit,
        )
        emission_kg = step_emission(grid_kwh, intensity)
        s_t = departures_satisfaction(result)
        reward = compute_reward(result, emission_kg, s_t, self.weights)
        state = build_state(self.sim.state, self.profiles, self.horizon)
        info = {
            "step_result": result,
            "emission_kg": emission_kg,
            "satisfaction_t": s_t,
        }
        return state, reward, self.sim.done, info
