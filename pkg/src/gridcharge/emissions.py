"""Per-step and episode-level carbon accounting.

Intensities are kg CO2 per kWh internally; reports use g CO2 per kWh.
Only grid imports count toward emissions by default: vehicle-to-grid
exports earn no negative emissions unless the ``net_export_credit``
variant is selected explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class EmissionError(ValueError):
    pass


def step_emission(grid_energy_kwh: float, intensity_kg_per_kwh: float) -> float:
    """Kilograms of CO2 for one step: grid energy times carbon intensity."""
    if grid_energy_kwh < 0:
        raise EmissionError("grid energy must be non-negative (imports only)")
    if intensity_kg_per_kwh < 0:
        raise EmissionError("carbon intensity must be non-negative")
    return grid_energy_kwh * intensity_kg_per_kwh


def net_grid_energy(
    import_kwh: float, export_kwh: float, net_export_credit: bool = False
) -> float:
    """Grid energy basis for emissions accounting.

    The default counts imports only.  With ``net_export_credit`` enabled,
    exports offset imports within the step (never below zero).
    """
    if not net_export_credit:
        return import_kwh
    return max(0.0, import_kwh - export_kwh)


def carbon_intensity_metric(total_kg: float, total_charged_kwh: float) -> float | None:
    """Episode carbon intensity in g CO2 per kWh charged; None when undefined."""
    if total_charged_kwh <= 0:
        return None
    return 1000.0 * total_kg / total_charged_kwh


def re_self_consumption(
    renewables_used_kwh: float, renewables_available_kwh: float
) -> float | None:
    """Fraction of local renewable generation consumed by EV charging."""
    if renewables_used_kwh < 0 or renewables_available_kwh < renewables_used_kwh:
        raise EmissionError("need available >= used >= 0")
    if renewables_available_kwh == 0:
        return None
    return renewables_used_kwh / renewables_available_kwh


@dataclass
class EmissionLedger:
    """Accumulates per-step emissions and charged energy over an episode."""

    per_step_kg: list[float] = field(default_factory=list)
    total_charged_kwh: float = 0.0

    def record(self, emission_kg: float, charged_kwh: float) -> None:
        if emission_kg < 0:
            raise EmissionError("per-step emission must be non-negative")
        self.per_step_kg.append(emission_kg)
        self.total_charged_kwh += charged_kwh

    @property
    def total_kg(self) -> float:
        return sum(self.per_step_kg)

    def carbon_intensity_g_per_kwh(self) -> float | None:
        return carbon_intensity_metric(self.total_kg, self.total_charged_kwh)
