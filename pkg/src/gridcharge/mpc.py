"""Emission-aware receding-horizon charging optimizer with an embedded LP solver.

Two modes: G2V (charging only, L1 tracking of a power setpoint) and V2G
(bidirectional, charge/discharge revenue).  Both add an emission term that
weights horizon energy by the forecast carbon intensity, a heavily
penalized slack for departure-energy shortfall, and a soft transformer
constraint whose slack equals the recorded overload.

The solver is a dense two-phase simplex with upper-bounded variables.
Pivoting is deterministic: the default rule picks the most negative
reduced cost and switches permanently to Bland's rule when a degeneracy
streak is detected; ``rule="bland"`` applies Bland's rule throughout.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .engine import Simulator
from .profiles import ProfileBundle, forecast_window

logger = logging.getLogger(__name__)

_BASIC, _LOWER, _UPPER = 0, 1, 2


class LpError(RuntimeError):
    pass


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class MpcMode(str, Enum):
    G2V = "g2v"
    V2G = "v2g"


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    values: np.ndarray | None
    objective: float | None


@dataclass
class HorizonProblem:
    """A minimization LP: c.x s.t. A_ub x <= b_ub, A_eq x = b_eq, 0 <= x <= upper."""

    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    upper: np.ndarray
    horizon: int
    step_hours: float
    mode: MpcMode
    ports: tuple[int, ...] = ()
    var_index: dict = field(default_factory=dict)
    pivot_rule: str = "hybrid"

    @property
    def n_vars(self) -> int:
        return int(self.c.size)


@dataclass(frozen=True)
class MpcSettings:
    mode: MpcMode = MpcMode.G2V
    horizon: int = 20
    lambda_emission: float = 5.0
    price_charge: float = 0.25
    price_discharge: float = 0.15
    departure_slack_penalty: float = 100.0
    overload_penalty: float = 1.0e4
    pivot_rule: str = "hybrid"


# ---------------------------------------------------------------------------
# Simplex with upper-bounded variables
# ---------------------------------------------------------------------------


def linprog_min(
    c: np.ndarray,
    a_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    a_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    upper: np.ndarray | None = None,
    rule: str = "hybrid",
    tol: float = 1e-9,
) -> LpSolution:
    """Minimize c.x subject to a_ub x <= b_ub, a_eq x = b_eq, 0 <= x <= upper."""
    c = np.asarray(c, dtype=np.float64)
    n = c.size
    a_ub = np.zeros((0, n)) if a_ub is None else np.asarray(a_ub, dtype=np.float64).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64).ravel()
    a_eq = np.zeros((0, n)) if a_eq is None else np.asarray(a_eq, dtype=np.float64).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64).ravel()
    if upper is None:
        upper = np.full(n, np.inf)
    else:
        upper = np.asarray(upper, dtype=np.float64).ravel()
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(a_ub)) and np.all(np.isfinite(a_eq))):
        raise LpError("coefficients must be finite")

    m_eq, m_ub = a_eq.shape[0], a_ub.shape[0]
    m = m_eq + m_ub
    n_slack = m_ub
    # Columns: structural | slacks (one per ub row) | artificials (appended).
    big_a = np.zeros((m, n + n_slack))
    big_a[:m_eq, :n] = a_eq
    big_a[m_eq:, :n] = a_ub
    for i in range(m_ub):
        big_a[m_eq + i, n + i] = 1.0
    b = np.concatenate([b_eq, b_ub]).astype(np.float64)
    u = np.concatenate([upper, np.full(n_slack, np.inf)])

    neg = b < 0
    big_a[neg] *= -1.0
    b = np.where(neg, -b, b)

    basis: list[int] = []
    art_cols: list[int] = []
    art_rows: list[int] = []
    extra: list[np.ndarray] = []
    for i in range(m):
        slack_col = n + (i - m_eq) if i >= m_eq else None
        if slack_col is not None and big_a[i, slack_col] == 1.0:
            basis.append(slack_col)
        else:
            col = np.zeros(m)
            col[i] = 1.0
            extra.append(col)
            art_cols.append(n + n_slack + len(art_cols))
            art_rows.append(i)
            basis.append(art_cols[-1])
    if extra:
        big_a = np.hstack([big_a, np.column_stack(extra)])
        u = np.concatenate([u, np.full(len(extra), np.inf)])
    n_total = big_a.shape[1]

    tableau = big_a.copy()
    x_basic = b.copy()
    basis_arr = np.asarray(basis, dtype=np.int64)
    status = np.full(n_total, _LOWER, dtype=np.int8)
    status[basis_arr] = _BASIC

    if art_cols:
        c1 = np.zeros(n_total)
        c1[art_cols] = 1.0
        d1 = c1 - c1[basis_arr] @ tableau
        outcome = _simplex_loop(tableau, d1, x_basic, basis_arr, status, u, rule, tol)
        if outcome is LpStatus.UNBOUNDED:
            raise LpError("phase-1 problem cannot be unbounded")
        phase1 = float(np.sum(x_basic[np.isin(basis_arr, art_cols)]))
        if phase1 > 1e-7:
            return LpSolution(LpStatus.INFEASIBLE, None, None)
        u[art_cols] = 0.0  # pin artificials at zero for phase 2

    c2 = np.zeros(n_total)
    c2[:n] = c
    d2 = c2 - c2[basis_arr] @ tableau
    outcome = _simplex_loop(tableau, d2, x_basic, basis_arr, status, u, rule, tol)
    if outcome is LpStatus.UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, None, None)

    x = np.zeros(n_total)
    upper_mask = status == _UPPER
    x[upper_mask] = u[upper_mask]
    x[basis_arr] = x_basic
    x_struct = np.clip(x[:n], 0.0, None)
    return LpSolution(LpStatus.OPTIMAL, x_struct, float(c @ x_struct))


def _simplex_loop(tableau, d, x_basic, basis, status, u, rule, tol):
    """Bounded-variable simplex iterations in place; returns a terminal status."""
    m, n_total = tableau.shape
    use_bland = rule == "bland"
    degen_streak = 0
    max_iter = 200 * (m + n_total) + 1000
    for _ in range(max_iter):
        movable = u > tol  # pinned variables (upper bound 0) can never improve
        cand = (((status == _LOWER) & (d < -tol)) | ((status == _UPPER) & (d > tol))) & movable
        if not cand.any():
            return LpStatus.OPTIMAL
        if use_bland:
            j = int(np.argmax(cand))
        else:
            score = np.where(cand, np.where(status == _LOWER, d, -d), 0.0)
            j = int(np.argmin(score))
        sigma = 1.0 if status[j] == _LOWER else -1.0
        direction = sigma * tableau[:, j]

        # Ratio test: basic to lower bound, basic to upper bound, or bound flip.
        t_best = u[j] if np.isfinite(u[j]) else np.inf
        leave_row = -1
        leave_to = _LOWER
        dec = direction > tol
        if dec.any():
            ratios = x_basic[dec] / direction[dec]
            rows = np.flatnonzero(dec)
            t_min = ratios.min()
            if t_min < t_best - tol:
                ties = rows[ratios <= t_min + tol]
                leave_row = int(ties[np.argmin(basis[ties])])
                t_best = max(t_min, 0.0)
                leave_to = _LOWER
        inc = direction < -tol
        if inc.any():
            rows = np.flatnonzero(inc)
            finite_u = np.isfinite(u[basis[rows]])
            rows = rows[finite_u]
            if rows.size:
                ratios = (u[basis[rows]] - x_basic[rows]) / (-direction[rows])
                t_min = ratios.min()
                if t_min < t_best - tol:
                    ties = rows[ratios <= t_min + tol]
                    leave_row = int(ties[np.argmin(basis[ties])])
                    t_best = max(t_min, 0.0)
                    leave_to = _UPPER

        if not np.isfinite(t_best):
            return LpStatus.UNBOUNDED

        if rule == "hybrid" and not use_bland:
            if t_best <= tol:
                degen_streak += 1
                if degen_streak > m + 10:
                    use_bland = True
            else:
                degen_streak = 0

        x_basic -= direction * t_best
        np.clip(x_basic, 0.0, None, out=x_basic)
        if leave_row < 0:
            # Bound flip: the entering variable traverses to its other bound.
            status[j] = _UPPER if status[j] == _LOWER else _LOWER
            continue

        entering_value = (0.0 if sigma > 0 else u[j]) + sigma * t_best
        leaving = basis[leave_row]
        status[leaving] = leave_to
        piv = tableau[leave_row, j]
        if abs(piv) < 1e-12:
            raise LpError("numerically singular pivot")
        tableau[leave_row] /= piv
        col = tableau[:, j].copy()
        col[leave_row] = 0.0
        tableau -= np.outer(col, tableau[leave_row])
        d -= d[j] * tableau[leave_row]
        x_basic[leave_row] = entering_value
        basis[leave_row] = j
        status[j] = _BASIC
    raise LpError("simplex iteration limit exceeded")


def solve_lp(problem: HorizonProblem) -> LpSolution:
    """Solve a built horizon problem; statuses are returned, never swallowed."""
    return linprog_min(
        problem.c,
        problem.a_ub,
        problem.b_ub,
        problem.a_eq,
        problem.b_eq,
        problem.upper,
        rule=problem.pivot_rule,
    )


# ---------------------------------------------------------------------------
# Horizon problem construction
# ---------------------------------------------------------------------------


def build_horizon_problem(
    mode: MpcMode,
    sim: Simulator,
    profiles: ProfileBundle,
    horizon: int,
    settings: MpcSettings,
) -> HorizonProblem:
    """Assemble the receding-horizon LP from the current simulator state.

    Decision variables are per-EV, per-step charge (and, in V2G, discharge)
    energies in kWh, bounded by the port rating.  Departure targets enter
    through penalized shortfall slacks; the transformer limit through a
    penalized overload slack per step, so the LP is always feasible in the
    physical variables.
    """
    if horizon < 1:
        raise LpError("horizon must be >= 1")
    t = sim.state.step
    dt = sim.step_hours
    topo = sim.topology
    connected = sim.connected()
    h_total = horizon

    ci = np.asarray(forecast_window(profiles.carbon_intensity, t, h_total).values)
    l_inf = np.asarray(forecast_window(profiles.inflexible, t, h_total).values)
    pv = np.asarray(forecast_window(profiles.solar, t, h_total).values)
    wind = np.asarray(forecast_window(profiles.wind, t, h_total).values)
    dr = np.asarray(forecast_window(profiles.dr_reduction, t, h_total).values)
    setpoint = np.asarray(forecast_window(profiles.setpoint, t, h_total).values)

    rate_ch = topo.port_max_charge_kw * dt
    rate_dis = topo.port_max_discharge_kw * dt
    v2g = mode is MpcMode.V2G

    var_index: dict = {}
    upper: list[float] = []
    cost: list[float] = []
    ends: list[int] = []

    def add_var(key, ub, c):
        var_index[key] = len(cost)
        upper.append(ub)
        cost.append(c)

    for k, (port, ev) in enumerate(connected):
        end = min(ev.session.departure_step - t, h_total)
        ends.append(end)
        for h in range(end):
            add_var(
                ("ch", k, h),
                rate_ch,
                settings.price_charge * v2g + settings.lambda_emission * ci[h],
            )
        if v2g:
            for h in range(end):
                add_var(
                    ("dis", k, h),
                    rate_dis,
                    -settings.price_discharge - settings.lambda_emission * ci[h],
                )
    if not v2g:
        for h in range(h_total):
            add_var(("dev_p", h), np.inf, 1.0)
            add_var(("dev_n", h), np.inf, 1.0)
    for k in range(len(connected)):
        add_var(("slack_target", k), np.inf, settings.departure_slack_penalty)
    for h in range(h_total):
        add_var(("overload", h), np.inf, settings.overload_penalty)

    n_vars = len(cost)
    rows_ub: list[np.ndarray] = []
    rhs_ub: list[float] = []
    rows_eq: list[np.ndarray] = []
    rhs_eq: list[float] = []

    def net_coeffs(row, k, h, sign=1.0, upto=False):
        """Add +-(E_ch - E_dis) coefficients for EV k at step h (or steps <= h)."""
        hs = range(h + 1) if upto else (h,)
        for hh in hs:
            key = ("ch", k, hh)
            if key in var_index:
                row[var_index[key]] += sign
            key = ("dis", k, hh)
            if key in var_index:
                row[var_index[key]] -= sign

    for k, (port, ev) in enumerate(connected):
        cap = ev.session.battery_capacity_kwh
        end = ends[k]
        headroom = (1.0 - ev.soc) * cap
        stored = ev.soc * cap
        if v2g:
            for h in range(end):
                if (h + 1) * rate_ch > headroom:
                    row = np.zeros(n_vars)
                    net_coeffs(row, k, h, 1.0, upto=True)
                    rows_ub.append(row)
                    rhs_ub.append(headroom)
                if (h + 1) * rate_dis > stored:
                    row = np.zeros(n_vars)
                    net_coeffs(row, k, h, -1.0, upto=True)
                    rows_ub.append(row)
                    rhs_ub.append(stored)
        else:
            if end * rate_ch > headroom:
                row = np.zeros(n_vars)
                net_coeffs(row, k, end - 1, 1.0, upto=True)
                rows_ub.append(row)
                rhs_ub.append(headroom)
        # Departure target: net energy by departure >= need - slack.  EVs whose
        # departure lies beyond the horizon pick up their target once it
        # becomes visible in a later re-solve.
        if ev.session.departure_step - t <= h_total:
            need = (ev.session.target_soc - ev.soc) * cap
            row = np.zeros(n_vars)
            net_coeffs(row, k, end - 1, -1.0, upto=True)
            row[var_index[("slack_target", k)]] -= 1.0
            rows_ub.append(row)
            rhs_ub.append(-need)

    station_pos_kwh = (
        topo.station_limit_pos_a * topo.voltage * math.sqrt(topo.phases) / 1000.0 * dt
    )
    station_neg_kwh = (
        -topo.station_limit_neg_a * topo.voltage * math.sqrt(topo.phases) / 1000.0 * dt
    )
    for h in range(h_total):
        active = [k for k in range(len(connected)) if h < ends[k]]
        if not active:
            continue
        if len(active) * rate_ch > station_pos_kwh:
            row = np.zeros(n_vars)
            for k in active:
                net_coeffs(row, k, h, 1.0)
            rows_ub.append(row)
            rhs_ub.append(station_pos_kwh)
        if v2g and len(active) * rate_dis > station_neg_kwh:
            row = np.zeros(n_vars)
            for k in active:
                net_coeffs(row, k, h, -1.0)
            rows_ub.append(row)
            rhs_ub.append(station_neg_kwh)
        # Transformer headroom, soft via the overload slack.
        row = np.zeros(n_vars)
        for k in active:
            net_coeffs(row, k, h, 1.0)
        row[var_index[("overload", h)]] -= 1.0
        rows_ub.append(row)
        rhs_ub.append(
            (topo.transformer_capacity_kw - dr[h] - l_inf[h] + pv[h] + wind[h]) * dt
        )

    if not v2g:
        for h in range(h_total):
            row = np.zeros(n_vars)
            for k in range(len(connected)):
                net_coeffs(row, k, h, 1.0)
            row[var_index[("dev_p", h)]] -= 1.0
            row[var_index[("dev_n", h)]] += 1.0
            rows_eq.append(row)
            rhs_eq.append(setpoint[h] * dt)

    return HorizonProblem(
        c=np.asarray(cost),
        a_ub=np.vstack(rows_ub) if rows_ub else np.zeros((0, n_vars)),
        b_ub=np.asarray(rhs_ub),
        a_eq=np.vstack(rows_eq) if rows_eq else np.zeros((0, n_vars)),
        b_eq=np.asarray(rhs_eq),
        upper=np.asarray(upper),
        horizon=h_total,
        step_hours=dt,
        mode=mode,
        ports=tuple(port for port, _ in connected),
        var_index=var_index,
        pivot_rule=settings.pivot_rule,
    )


def mpc_act(
    mode: MpcMode,
    sim: Simulator,
    profiles: ProfileBundle,
    horizon: int,
    settings: MpcSettings,
) -> np.ndarray:
    """Solve the horizon problem and return the first-step action vector.

    Simultaneous charge/discharge (possible since the binary exclusion is
    relaxed) is reconciled by netting per EV; solver failures fall back to
    the zero action with a logged warning.
    """
    n = sim.topology.n_ports
    actions = np.zeros(n)
    if not sim.connected():
        return actions
    problem = build_horizon_problem(mode, sim, profiles, horizon, settings)
    try:
        solution = solve_lp(problem)
    except LpError as exc:
        logger.warning("MPC solve failed (%s); falling back to zero action", exc)
        return actions
    if solution.status is not LpStatus.OPTIMAL:
        logger.warning("MPC solve status %s; falling back to zero action", solution.status.value)
        return actions
    dt = problem.step_hours
    for k, port in enumerate(problem.ports):
        e_ch = solution.values[problem.var_index[("ch", k, 0)]] if ("ch", k, 0) in problem.var_index else 0.0
        e_dis = (
            solution.values[problem.var_index[("dis", k, 0)]]
            if ("dis", k, 0) in problem.var_index
            else 0.0
        )
        power = (e_ch - e_dis) / dt
        if power >= 0:
            actions[port] = power / sim.topology.port_max_charge_kw
        else:
            actions[port] = power / sim.topology.port_max_discharge_kw
    return np.clip(actions, -1.0, 1.0)


class MpcController:
    """Receding-horizon controller bound to fixed settings."""

    def __init__(self, settings: MpcSettings):
        self.settings = settings

    def act(self, sim: Simulator, profiles: ProfileBundle) -> np.ndarray:
        return mpc_act(self.settings.mode, sim, profiles, self.settings.horizon, self.settings)
