"""Rule-based charging controllers.

Six strategies: AFAP (full power to target on arrival), AFAP+ (site power
cap), AFAP* (stop at a configured SoC), ALAP (latest feasible start), FSB
(fixed start time, AFAP afterwards), and RR (rotating power budget).
Heuristics never discharge; all actions are in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .engine import Simulator
from .profiles import ProfileBundle

SOC_EPS = 1e-9


class HeuristicKind(str, Enum):
    AFAP = "afap"
    AFAP_PLUS = "afap_plus"
    AFAP_STAR = "afap_star"
    ALAP = "alap"
    FSB = "fsb"
    RR = "rr"


@dataclass(frozen=True)
class HeuristicSpec:
    """Heuristic selection plus the parameter required by its kind.

    power_cap_kw applies to AFAP+; stop_soc to AFAP*; start_step to FSB;
    rr_budget_kw to RR (None means live transformer headroom).
    """

    kind: HeuristicKind
    power_cap_kw: float | None = None
    stop_soc: float | None = None
    start_step: int | None = None
    rr_budget_kw: float | None = None

    def __post_init__(self):
        required = {
            HeuristicKind.AFAP_PLUS: ("power_cap_kw",),
            HeuristicKind.AFAP_STAR: ("stop_soc",),
            HeuristicKind.FSB: ("start_step",),
        }
        for name in required.get(self.kind, ()):
            if getattr(self, name) is None:
                raise ValueError(f"{self.kind.value} requires {name}")


def _wants_charge(soc: float, stop_soc: float) -> bool:
    return soc < stop_soc - SOC_EPS


def afap_family_act(spec: HeuristicSpec, sim: Simulator) -> np.ndarray:
    """AFAP and its variants: full-rate charging with optional cap/stop/start."""
    n = sim.topology.n_ports
    actions = np.zeros(n)
    t = sim.state.step
    if spec.kind is HeuristicKind.FSB and t < spec.start_step:
        return actions
    for port, ev in sim.connected():
        stop = spec.stop_soc if spec.kind is HeuristicKind.AFAP_STAR else ev.session.target_soc
        if _wants_charge(ev.soc, stop):
            actions[port] = 1.0
    if spec.kind is HeuristicKind.AFAP_PLUS:
        total = float(actions.sum()) * sim.topology.port_max_charge_kw
        if total > spec.power_cap_kw:
            actions *= spec.power_cap_kw / total
    return actions


def alap_act(sim: Simulator) -> np.ndarray:
    """Idle until the latest start that still reaches the target by departure.

    The needed-steps count uses the linear battery model at the full port
    rate; EVs past their target stay idle.
    """
    n = sim.topology.n_ports
    actions = np.zeros(n)
    t = sim.state.step
    rate_kwh = sim.topology.port_max_charge_kw * sim.step_hours
    for port, ev in sim.connected():
        need = max(0.0, (ev.session.target_soc - ev.soc)) * ev.session.battery_capacity_kwh
        if need <= SOC_EPS:
            continue
        needed_steps = math.ceil(need / rate_kwh - 1e-12)
        if ev.session.departure_step - t <= needed_steps:
            actions[port] = 1.0
    return actions


def round_robin_act(sim: Simulator, rr_budget_kw: float) -> np.ndarray:
    """Grant full-rate charging in port order rotated by t until the budget runs out."""
    if rr_budget_kw < 0:
        raise ValueError("rr_budget_kw must be non-negative")
    n = sim.topology.n_ports
    actions = np.zeros(n)
    t = sim.state.step
    candidates = [
        port
        for port, ev in sim.connected()
        if _wants_charge(ev.soc, ev.session.target_soc)
    ]
    candidates.sort(key=lambda p: (p - t) % n)
    remaining = rr_budget_kw
    rating = sim.topology.port_max_charge_kw
    for port in candidates:
        if remaining <= 0:
            break
        grant = min(rating, remaining)
        actions[port] = grant / rating
        remaining -= grant
    return actions


class HeuristicController:
    """Adapts a HeuristicSpec to the common controller interface."""

    def __init__(self, spec: HeuristicSpec):
        self.spec = spec

    def act(self, sim: Simulator, profiles: ProfileBundle) -> np.ndarray:
        spec = self.spec
        if spec.kind is HeuristicKind.ALAP:
            return alap_act(sim)
        if spec.kind is HeuristicKind.RR:
            budget = spec.rr_budget_kw
            if budget is None:
                t = sim.state.step
                budget = max(
                    0.0,
                    sim.topology.transformer_capacity_kw - profiles.inflexible.value_at(t),
                )
            return round_robin_act(sim, budget)
        return afap_family_act(spec, sim)
