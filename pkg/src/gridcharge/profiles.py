"""Exogenous time series: loading, resampling, renewable scaling, and forecasts.

Every signal that drives the simulation (grid carbon intensity, solar and
wind generation, inflexible background load, demand-response reductions,
MPC tracking setpoints) is carried by an immutable :class:`TimeSeries`
sampled on the simulation step grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

EPISODE_START_HOUR = 5.0


class Unit(str, Enum):
    """Physical unit tag of a series."""

    KW = "kw"
    KG_PER_KWH = "kg_per_kwh"
    G_PER_KWH = "g_per_kwh"
    CURRENCY_PER_KWH = "currency_per_kwh"


class ProfileError(ValueError):
    """Raised for invalid series data or incompatible grids."""


# Units whose values must be non-negative (generation/load/intensity).
_NON_NEGATIVE_UNITS = {Unit.KW, Unit.KG_PER_KWH, Unit.G_PER_KWH}


@dataclass(frozen=True)
class TimeSeries:
    """A uniformly sampled signal on the simulation step grid.

    step_hours:
        duration of one sample in hours (0.25 for the default 15-min grid)
    values:
        one scalar per step; stored as a read-only float64 array
    unit:
        declared unit of the samples
    """

    step_hours: float
    values: np.ndarray
    unit: Unit

    def __post_init__(self):
        if self.step_hours <= 0:
            raise ProfileError("step_hours must be positive")
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ProfileError("values must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ProfileError("values must be finite")
        if self.unit in _NON_NEGATIVE_UNITS and np.any(arr < 0):
            raise ProfileError(f"negative values not allowed for unit {self.unit.value}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)

    def value_at(self, step: int) -> float:
        return float(self.values[step])

    def energy_kwh(self) -> float:
        """Integral of a kW series over its full span, in kWh."""
        if self.unit is not Unit.KW:
            raise ProfileError("energy_kwh is only defined for kW series")
        return float(self.values.sum() * self.step_hours)

    def scaled(self, factor: float) -> "TimeSeries":
        return TimeSeries(self.step_hours, self.values * factor, self.unit)


class SourceMix(str, Enum):
    SOLAR = "solar"
    WIND = "wind"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class PenetrationSpec:
    """Target renewable share of baseline daily charging energy.

    For HYBRID, ``hybrid_split`` is the fraction of the target assigned to
    solar; the remainder goes to wind.
    """

    target_fraction: float = 0.0
    source_mix: SourceMix = SourceMix.HYBRID
    hybrid_split: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.target_fraction <= 1.0:
            raise ProfileError("target_fraction must lie in [0, 1]")
        if not 0.0 <= self.hybrid_split <= 1.0:
            raise ProfileError("hybrid_split must lie in [0, 1]")


@dataclass(frozen=True)
class ForecastWindow:
    """A fixed-length lookahead slice of a series."""

    horizon_steps: int
    values: tuple[float, ...]

    def __post_init__(self):
        if self.horizon_steps < 1:
            raise ProfileError("horizon_steps must be >= 1")
        if len(self.values) != self.horizon_steps:
            raise ProfileError("forecast length must equal horizon_steps")


def load_series(path: str | Path, unit: Unit, step_hours: float) -> TimeSeries:
    """Load a two-column ``step,value`` CSV into a TimeSeries.

    A header row is optional.  Step indices must be strictly increasing.
    Series declared in g/kWh are canonicalized to kg/kWh on ingestion.
    """
    path = Path(path)
    if not path.exists():
        raise ProfileError(f"profile file not found: {path}")
    values: list[float] = []
    last_idx: int | None = None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise ProfileError(f"{path}:{lineno}: expected 'step,value'")
            first = row[0].strip()
            if lineno == 1 and not _is_number(first):
                continue  # header
            try:
                idx = int(float(first))
                val = float(row[1])
            except ValueError as exc:
                raise ProfileError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if last_idx is not None and idx <= last_idx:
                raise ProfileError(f"{path}:{lineno}: step index not increasing")
            last_idx = idx
            values.append(val)
    if not values:
        raise ProfileError(f"{path}: no samples")
    arr = np.asarray(values, dtype=np.float64)
    if unit in _NON_NEGATIVE_UNITS and np.any(arr < 0):
        bad = int(np.argmax(arr < 0))
        raise ProfileError(f"{path}: negative value at sample {bad} for unit {unit.value}")
    if unit is Unit.G_PER_KWH:
        return TimeSeries(step_hours, arr / 1000.0, Unit.KG_PER_KWH)
    return TimeSeries(step_hours, arr, unit)


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def resample_to_grid(
    series: TimeSeries,
    target_step_hours: float,
    target_len: int,
    extrapolate: bool = False,
) -> TimeSeries:
    """Zero-order-hold resampling onto a target grid.

    The value of target step ``i`` is the source sample covering time
    ``i * target_step_hours``.  Target steps past the end of the source
    raise unless ``extrapolate`` holds the final sample.
    """
    if target_step_hours <= 0:
        raise ProfileError("target_step_hours must be positive")
    if target_len < 1:
        raise ProfileError("target_len must be >= 1")
    start_times = np.arange(target_len) * target_step_hours
    src_idx = np.floor(start_times / series.step_hours + 1e-12).astype(int)
    n = len(series)
    if np.any(src_idx >= n):
        if not extrapolate:
            raise ProfileError(
                "target grid extends beyond source coverage and extrapolation is disabled"
            )
        src_idx = np.minimum(src_idx, n - 1)
    return TimeSeries(target_step_hours, series.values[src_idx], series.unit)


def penetration_multiplier(
    base_profile: TimeSeries,
    baseline_daily_charging_energy: float,
    spec: PenetrationSpec,
) -> float:
    """Capacity multiplier scaling a base profile to the penetration target.

    The multiplier ``m`` satisfies
    ``m * daily_energy(base_profile) == target_fraction * baseline_daily_charging_energy``.
    A zero target yields zero regardless of the base profile.
    """
    if spec.target_fraction == 0.0:
        return 0.0
    base_energy = base_profile.energy_kwh()
    if base_energy <= 0.0:
        raise ProfileError("base profile has zero energy but target_fraction > 0")
    return spec.target_fraction * baseline_daily_charging_energy / base_energy


def renewable_multipliers(
    solar_base: TimeSeries,
    wind_base: TimeSeries,
    baseline_daily_charging_energy: float,
    spec: PenetrationSpec,
) -> tuple[float, float]:
    """Split the penetration target into (solar, wind) capacity multipliers."""
    if spec.source_mix is SourceMix.SOLAR:
        shares = (1.0, 0.0)
    elif spec.source_mix is SourceMix.WIND:
        shares = (0.0, 1.0)
    else:
        shares = (spec.hybrid_split, 1.0 - spec.hybrid_split)
    m_solar = penetration_multiplier(
        solar_base,
        baseline_daily_charging_energy,
        replace(spec, target_fraction=spec.target_fraction * shares[0]),
    )
    m_wind = penetration_multiplier(
        wind_base,
        baseline_daily_charging_energy,
        replace(spec, target_fraction=spec.target_fraction * shares[1]),
    )
    return m_solar, m_wind


def forecast_window(
    series: TimeSeries,
    t: int,
    horizon: int,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> ForecastWindow:
    """Perfect-foresight slice ``series[t : t+horizon]`` with persistence padding.

    Steps past the end of the series repeat the final sample.  The optional
    additive Gaussian noise hook defaults to zero (exact foresight).
    """
    if not 0 <= t < len(series):
        raise ProfileError(f"forecast start {t} outside series of length {len(series)}")
    if horizon < 1:
        raise ProfileError("horizon must be >= 1")
    idx = np.minimum(np.arange(t, t + horizon), len(series) - 1)
    vals = series.values[idx].copy()
    if noise_sigma > 0.0:
        gen = rng if rng is not None else np.random.default_rng()
        vals = vals + gen.normal(0.0, noise_sigma, size=vals.shape)
    return ForecastWindow(horizon, tuple(float(v) for v in vals))


# ---------------------------------------------------------------------------
# Synthetic stand-in profiles
#
# Self-contained replacements for the real grid/weather feeds.  All are
# deterministic smooth daily shapes on the episode grid; magnitudes are
# nominal and get rescaled by the penetration multipliers.
# ---------------------------------------------------------------------------


def _hours(episode_steps: int, step_hours: float, start_hour: float) -> np.ndarray:
    return (start_hour + np.arange(episode_steps) * step_hours) % 24.0


def synthetic_solar(
    episode_steps: int = 96,
    step_hours: float = 0.25,
    start_hour: float = EPISODE_START_HOUR,
    peak_kw: float = 100.0,
) -> TimeSeries:
    """Clear-day PV bell centred early afternoon, zero outside daylight."""
    h = _hours(episode_steps, step_hours, start_hour)
    bell = np.exp(-(((h - 13.5) / 3.2) ** 2))
    vals = peak_kw * np.where((h >= 6.0) & (h <= 21.0), bell, 0.0)
    return TimeSeries(step_hours, vals, Unit.KW)


def synthetic_wind(
    episode_steps: int = 96,
    step_hours: float = 0.25,
    start_hour: float = EPISODE_START_HOUR,
    scale_kw: float = 100.0,
) -> TimeSeries:
    """Broad wind shape with a daytime plateau and a nonzero overnight floor."""
    h = _hours(episode_steps, step_hours, start_hour)
    vals = scale_kw * (
        0.80
        + 0.30 * np.sin(2.0 * np.pi * (h - 10.0) / 24.0)
        + 0.08 * np.sin(4.0 * np.pi * (h - 2.0) / 24.0)
    )
    return TimeSeries(step_hours, np.maximum(vals, 0.0), Unit.KW)


def synthetic_carbon_intensity(
    episode_steps: int = 96,
    step_hours: float = 0.25,
    start_hour: float = EPISODE_START_HOUR,
) -> TimeSeries:
    """Daily grid carbon intensity in kg/kWh: clean overnight, evening peak."""
    h = _hours(episode_steps, step_hours, start_hour)
    g_per_kwh = (
        250.0
        + 80.0 * np.sin(2.0 * np.pi * (h - 15.0) / 24.0)
        + 60.0 * np.exp(-(((h - 18.0) / 2.0) ** 2))
    )
    return TimeSeries(step_hours, g_per_kwh / 1000.0, Unit.KG_PER_KWH)


def synthetic_inflexible_load(
    episode_steps: int = 96,
    step_hours: float = 0.25,
    start_hour: float = EPISODE_START_HOUR,
    base_kw: float = 25.0,
    peak_kw: float = 35.0,
) -> TimeSeries:
    """Office-style background load: overnight base plus a working-hours bump."""
    h = _hours(episode_steps, step_hours, start_hour)
    vals = base_kw + peak_kw * np.exp(-(((h - 11.0) / 3.5) ** 2))
    return TimeSeries(step_hours, vals, Unit.KW)


def demand_response_series(
    episode_steps: int = 96,
    step_hours: float = 0.25,
    start_hour: float = EPISODE_START_HOUR,
    event_start_hour: float = 17.0,
    event_duration_hours: float = 2.0,
    reduction_kw: float = 20.0,
) -> TimeSeries:
    """Capacity reduction (kW) for one contiguous demand-response event per day."""
    h = _hours(episode_steps, step_hours, start_hour)
    end = event_start_hour + event_duration_hours
    active = (h >= event_start_hour) & (h < end)
    return TimeSeries(step_hours, np.where(active, reduction_kw, 0.0), Unit.KW)


def zero_series(
    episode_steps: int = 96, step_hours: float = 0.25, unit: Unit = Unit.KW
) -> TimeSeries:
    return TimeSeries(step_hours, np.zeros(episode_steps), unit)


@dataclass(frozen=True)
class ProfileBundle:
    """All exogenous series for one episode, aligned on one grid.

    ``solar`` and ``wind`` are already scaled by the penetration multipliers;
    ``carbon_intensity`` is canonical kg/kWh.
    """

    carbon_intensity: TimeSeries
    solar: TimeSeries
    wind: TimeSeries
    inflexible: TimeSeries
    dr_reduction: TimeSeries
    setpoint: TimeSeries

    def __post_init__(self):
        ref = self.carbon_intensity
        for name in ("solar", "wind", "inflexible", "dr_reduction", "setpoint"):
            s: TimeSeries = getattr(self, name)
            if len(s) != len(ref) or not math.isclose(s.step_hours, ref.step_hours):
                raise ProfileError(f"series '{name}' is not aligned with the episode grid")

    @property
    def n_steps(self) -> int:
        return len(self.carbon_intensity)

    @property
    def step_hours(self) -> float:
        return self.carbon_intensity.step_hours


def build_profile_bundle(
    episode_steps: int,
    step_hours: float,
    penetration: PenetrationSpec,
    baseline_daily_charging_energy: float,
    transformer_capacity_kw: float,
    n_ports: int = 25,
    start_hour: float = EPISODE_START_HOUR,
    overrides: dict[str, TimeSeries] | None = None,
) -> ProfileBundle:
    """Assemble the default synthetic bundle with renewables scaled to target.

    ``overrides`` may replace any base series by name (``carbon_intensity``,
    ``solar``, ``wind``, ``inflexible``, ``dr_reduction``, ``setpoint``)
    before the penetration scaling is applied to solar/wind.
    """
    overrides = overrides or {}
    port_scale = n_ports / 25.0
    solar_base = overrides.get(
        "solar", synthetic_solar(episode_steps, step_hours, start_hour)
    )
    wind_base = overrides.get("wind", synthetic_wind(episode_steps, step_hours, start_hour))
    m_solar, m_wind = renewable_multipliers(
        solar_base, wind_base, baseline_daily_charging_energy, penetration
    )
    ci = overrides.get(
        "carbon_intensity", synthetic_carbon_intensity(episode_steps, step_hours, start_hour)
    )
    inflexible = overrides.get(
        "inflexible",
        synthetic_inflexible_load(
            episode_steps,
            step_hours,
            start_hour,
            base_kw=25.0 * port_scale,
            peak_kw=35.0 * port_scale,
        ),
    )
    dr = overrides.get(
        "dr_reduction",
        demand_response_series(
            episode_steps,
            step_hours,
            start_hour,
            reduction_kw=0.2 * transformer_capacity_kw,
        ),
    )
    setpoint = overrides.get("setpoint", zero_series(episode_steps, step_hours))
    return ProfileBundle(
        carbon_intensity=ci,
        solar=solar_base.scaled(m_solar),
        wind=wind_base.scaled(m_wind),
        inflexible=inflexible,
        dr_reduction=dr,
        setpoint=setpoint,
    )
