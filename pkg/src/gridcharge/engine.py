"""Site physics: EVSE power conversion, station limits, SoC dynamics, balance.

Sign convention throughout: positive power charges a vehicle (grid-to-vehicle),
negative power discharges it (vehicle-to-grid).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .profiles import ProfileBundle
from .scenario import EvSession, ScenarioConfig

DEFAULT_STATION_AGGREGATE_KW_PER_PORT = 10.0


class EngineError(ValueError):
    pass


@dataclass(frozen=True)
class SiteTopology:
    """Electrical layout: one station of identical EVSE ports on one transformer."""

    n_ports: int
    voltage: float
    phases: int
    port_max_charge_kw: float
    port_max_discharge_kw: float
    charge_efficiency: float
    discharge_efficiency: float
    station_limit_pos_a: float
    station_limit_neg_a: float
    transformer_capacity_kw: float

    @classmethod
    def from_config(
        cls, config: ScenarioConfig, station_aggregate_kw: float | None = None
    ) -> "SiteTopology":
        if station_aggregate_kw is None:
            station_aggregate_kw = max(
                DEFAULT_STATION_AGGREGATE_KW_PER_PORT * config.n_ports,
                config.evse_max_charge_kw,
                config.evse_max_discharge_kw,
            )
        limit_a = kw_to_current(station_aggregate_kw, config.voltage, config.phases)
        return cls(
            n_ports=config.n_ports,
            voltage=config.voltage,
            phases=config.phases,
            port_max_charge_kw=config.evse_max_charge_kw,
            port_max_discharge_kw=config.evse_max_discharge_kw,
            charge_efficiency=config.charge_efficiency,
            discharge_efficiency=config.discharge_efficiency,
            station_limit_pos_a=limit_a,
            station_limit_neg_a=-limit_a,
            transformer_capacity_kw=config.transformer_capacity_kw,
        )


@dataclass(frozen=True)
class PortCommand:
    """Signed commanded current at one EVSE port, in amperes."""

    current_a: float


@dataclass(frozen=True)
class EvState:
    """A connected vehicle's evolving battery state."""

    session: EvSession
    soc: float
    energy_charged_cum_kwh: float = 0.0
    energy_discharged_cum_kwh: float = 0.0


@dataclass
class SimState:
    """Mutable per-episode simulation state."""

    step: int
    ev_states: list[EvState | None]
    last_total_power_kw: float = 0.0
    cum_overload_kwh: float = 0.0
    cum_curtailed_kwh: float = 0.0


@dataclass(frozen=True)
class StepResult:
    """Energy flows and bookkeeping for one simulation step."""

    step: int
    step_hours: float
    ev_power_kw: tuple[float, ...]
    site_power_kw: float
    grid_import_ev_kw: float
    overload_kw: float
    curtailed_kw: float
    served_kwh: float
    discharged_kwh: float
    renewables_used_kw: float
    departed: tuple[tuple[float, float], ...]  # (final_soc, target_soc) pairs

    @property
    def curtailed_kwh(self) -> float:
        return self.curtailed_kw * self.step_hours

    @property
    def ev_charge_kw(self) -> float:
        return sum(p for p in self.ev_power_kw if p > 0)


def evse_power(cmd: PortCommand, voltage: float, phases: int, efficiency: float) -> float:
    """Port power in kW from a commanded current: P = eta * I * V * sqrt(phi)."""
    if voltage <= 0:
        raise EngineError("voltage must be positive")
    if phases not in (1, 3):
        raise EngineError("phases must be 1 or 3")
    if not 0 < efficiency <= 1:
        raise EngineError("efficiency must lie in (0, 1]")
    return efficiency * cmd.current_a * voltage * math.sqrt(phases) / 1000.0


def kw_to_current(power_kw: float, voltage: float, phases: int, efficiency: float = 1.0) -> float:
    """Inverse of :func:`evse_power`: signed amperes delivering ``power_kw``."""
    return power_kw * 1000.0 / (efficiency * voltage * math.sqrt(phases))


def map_action(
    action: float, max_charge_kw: float, max_discharge_kw: float | None = None
) -> float:
    """Map a normalized action in [-1, 1] to commanded port power in kW."""
    if max_charge_kw <= 0:
        raise EngineError("port rating must be positive")
    if max_discharge_kw is None:
        max_discharge_kw = max_charge_kw
    a = min(1.0, max(-1.0, float(action)))
    return a * max_charge_kw if a >= 0 else a * max_discharge_kw


def normalize_station_currents(
    commands: list[PortCommand], limit_pos_a: float, limit_neg_a: float
) -> list[PortCommand]:
    """Scale all commands by one factor if the aggregate leaves [I-, I+].

    ``limit_pos_a >= 0`` bounds the aggregate from above, ``limit_neg_a <= 0``
    (signed) from below.  Feasible aggregates pass through unchanged.
    """
    if limit_pos_a < 0 or limit_neg_a > 0:
        raise EngineError("station limits must satisfy limit_neg_a <= 0 <= limit_pos_a")
    total = sum(c.current_a for c in commands)
    tol = 1e-9
    if total > limit_pos_a + tol:
        factor = limit_pos_a / total
    elif total < limit_neg_a - tol:
        factor = limit_neg_a / total
    else:
        return list(commands)
    return [PortCommand(c.current_a * factor) for c in commands]


def soc_step(ev: EvState, power_kw: float, dt_hours: float) -> EvState:
    """Advance one vehicle's SoC by one step under ``power_kw``.

    Charging below the CV threshold tau is linear in energy; at or above tau
    it follows the exponential constant-voltage taper.  Discharging always
    uses the linear branch.  The SoC is clamped to [0, 1]; clipped energy is
    excluded from the cumulative served/discharged counters.
    """
    cap = ev.session.battery_capacity_kwh
    if cap <= 0:
        raise EngineError("battery capacity must be positive")
    tau = ev.session.cv_threshold
    soc = ev.soc
    if power_kw > 0 and soc >= tau and tau < 1.0:
        new_soc = 1.0 + (soc - 1.0) * math.exp(power_kw * dt_hours / (cap * (tau - 1.0)))
    else:
        new_soc = soc + power_kw * dt_hours / cap
    new_soc = min(1.0, max(0.0, new_soc))
    delta_kwh = (new_soc - soc) * cap
    return replace(
        ev,
        soc=new_soc,
        energy_charged_cum_kwh=ev.energy_charged_cum_kwh + max(0.0, delta_kwh),
        energy_discharged_cum_kwh=ev.energy_discharged_cum_kwh + max(0.0, -delta_kwh),
    )


def site_balance(
    ev_powers_kw: list[float] | tuple[float, ...] | np.ndarray,
    inflexible_kw: float,
    pv_kw: float,
    wind_kw: float,
) -> float:
    """Net site power seen by the transformer (may be negative)."""
    return float(sum(ev_powers_kw) + inflexible_kw - pv_kw - wind_kw)


def transformer_overload(site_power_kw: float, capacity_kw: float, dr_reduction_kw: float) -> float:
    """Overload magnitude above the usable capacity; recorded, never curtailed."""
    if capacity_kw <= 0:
        raise EngineError("transformer capacity must be positive")
    if dr_reduction_kw < 0:
        raise EngineError("demand-response reduction must be non-negative")
    return max(0.0, site_power_kw - (capacity_kw - dr_reduction_kw))


def ev_grid_import(ev_charge_kw: float, pv_kw: float, wind_kw: float) -> tuple[float, float]:
    """EV-related grid import and curtailed renewables, both non-negative.

    Renewables serve EV charging first; the shortfall is imported and any
    surplus beyond charging demand is curtailed.
    """
    if ev_charge_kw < 0:
        raise EngineError("ev_charge_kw is the charging component and must be >= 0")
    supply = pv_kw + wind_kw
    grid_import = max(0.0, ev_charge_kw - supply)
    curtailed = max(0.0, supply - ev_charge_kw)
    return grid_import, curtailed


class Simulator:
    """Advances one episode step by step under normalized port actions."""

    def __init__(
        self,
        topology: SiteTopology,
        sessions: tuple[EvSession, ...],
        profiles: ProfileBundle,
        episode_steps: int,
    ):
        if profiles.n_steps < episode_steps:
            raise EngineError("profiles do not cover the episode")
        self.topology = topology
        self.profiles = profiles
        self.episode_steps = episode_steps
        self._sessions_by_arrival: dict[int, list[EvSession]] = {}
        for s in sorted(sessions, key=lambda s: (s.arrival_step, s.port)):
            if s.port >= topology.n_ports:
                raise EngineError(f"session on port {s.port} exceeds n_ports")
            self._sessions_by_arrival.setdefault(s.arrival_step, []).append(s)
        self.state = SimState(step=0, ev_states=[None] * topology.n_ports)
        self.departed: list[tuple[float, float]] = []
        self._connect_arrivals(0)

    def _connect_arrivals(self, t: int) -> None:
        for session in self._sessions_by_arrival.get(t, ()):
            if self.state.ev_states[session.port] is not None:
                raise EngineError(f"port {session.port} double-booked at step {t}")
            self.state.ev_states[session.port] = EvState(
                session=session, soc=session.initial_soc
            )

    @property
    def step_hours(self) -> float:
        return self.profiles.step_hours

    def connected(self) -> list[tuple[int, EvState]]:
        return [(p, ev) for p, ev in enumerate(self.state.ev_states) if ev is not None]

    @property
    def done(self) -> bool:
        return self.state.step >= self.episode_steps

    def step(self, actions: np.ndarray) -> StepResult:
        """Apply one action vector; returns the realized step flows."""
        if self.done:
            raise EngineError("episode is finished; reset before stepping")
        actions = np.asarray(actions, dtype=np.float64)
        if actions.shape != (self.topology.n_ports,):
            raise EngineError(
                f"action length {actions.shape} does not match n_ports {self.topology.n_ports}"
            )
        topo = self.topology
        t = self.state.step
        dt = self.step_hours

        # Commanded power -> current, station normalization, back to power.
        commands: list[PortCommand] = []
        for p in range(topo.n_ports):
            ev = self.state.ev_states[p]
            if ev is None:
                commands.append(PortCommand(0.0))
                continue
            power = map_action(actions[p], topo.port_max_charge_kw, topo.port_max_discharge_kw)
            eff = topo.charge_efficiency if power >= 0 else topo.discharge_efficiency
            commands.append(PortCommand(kw_to_current(power, topo.voltage, topo.phases, eff)))
        commands = normalize_station_currents(
            commands, topo.station_limit_pos_a, topo.station_limit_neg_a
        )

        actual_power = [0.0] * topo.n_ports
        served_kwh = 0.0
        discharged_kwh = 0.0
        for p, cmd in enumerate(commands):
            ev = self.state.ev_states[p]
            if ev is None:
                continue
            eff = topo.charge_efficiency if cmd.current_a >= 0 else topo.discharge_efficiency
            power = evse_power(cmd, topo.voltage, topo.phases, eff)
            new_ev = soc_step(ev, power, dt)
            delta_kwh = (new_ev.soc - ev.soc) * ev.session.battery_capacity_kwh
            actual_power[p] = delta_kwh / dt
            served_kwh += max(0.0, delta_kwh)
            discharged_kwh += max(0.0, -delta_kwh)
            self.state.ev_states[p] = new_ev

        inflexible = self.profiles.inflexible.value_at(t)
        pv = self.profiles.solar.value_at(t)
        wind = self.profiles.wind.value_at(t)
        dr = self.profiles.dr_reduction.value_at(t)

        site_kw = site_balance(actual_power, inflexible, pv, wind)
        overload_kw = transformer_overload(site_kw, topo.transformer_capacity_kw, dr)
        ev_charge_kw = sum(p for p in actual_power if p > 0)
        grid_import_kw, curtailed_kw = ev_grid_import(ev_charge_kw, pv, wind)
        renewables_used_kw = pv + wind - curtailed_kw

        departed_now: list[tuple[float, float]] = []
        for p, ev in enumerate(self.state.ev_states):
            if ev is not None and ev.session.departure_step == t + 1:
                departed_now.append((ev.soc, ev.session.target_soc))
                self.state.ev_states[p] = None
        self.departed.extend(departed_now)

        self.state.step = t + 1
        self._connect_arrivals(t + 1)
        self.state.last_total_power_kw = float(sum(actual_power))
        self.state.cum_overload_kwh += overload_kw * dt
        self.state.cum_curtailed_kwh += curtailed_kw * dt

        return StepResult(
            step=t,
            step_hours=dt,
            ev_power_kw=tuple(actual_power),
            site_power_kw=site_kw,
            grid_import_ev_kw=grid_import_kw,
            overload_kw=overload_kw,
            curtailed_kw=curtailed_kw,
            served_kwh=served_kwh,
            discharged_kwh=discharged_kwh,
            renewables_used_kw=renewables_used_kw,
            departed=tuple(departed_now),
        )
