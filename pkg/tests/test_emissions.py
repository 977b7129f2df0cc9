"""Carbon accounting: per-step emission, episode CI metric, RE self-consumption."""

import numpy as np
import pytest

from gridcharge.emissions import (
    EmissionError,
    EmissionLedger,
    carbon_intensity_metric,
    net_grid_energy,
    re_self_consumption,
    step_emission,
)

# Published per-scenario (CO2 kg, charged kWh) -> CI g/kWh reference pairs.
CI_REFERENCE = [
    (67.62, 340.58, 198.54),
    (8.52, 355.53, 23.96),
    (48.41, 314.21, 154.07),
    (25.47, 363.54, 70.06),
    (10.02, 267.53, 37.45),
]


class TestStepEmission:
    def test_worked_values(self):
        assert step_emission(10.0, 0.5) == 5.0
        assert step_emission(1.0, 0.7) == pytest.approx(0.7)
        assert step_emission(0.0, 0.9) == 0.0

    def test_rejects_negative(self):
        with pytest.raises(EmissionError):
            step_emission(-1.0, 0.5)
        with pytest.raises(EmissionError):
            step_emission(1.0, -0.5)


class TestNetGridEnergy:
    def test_import_only_default(self):
        assert net_grid_energy(10.0, 4.0) == 10.0

    def test_export_credit_clamped(self):
        assert net_grid_energy(10.0, 4.0, net_export_credit=True) == 6.0
        assert net_grid_energy(3.0, 7.0, net_export_credit=True) == 0.0


class TestCarbonIntensityMetric:
    @pytest.mark.parametrize("co2,charged,expected", CI_REFERENCE)
    def test_reference_rows(self, co2, charged, expected):
        assert carbon_intensity_metric(co2, charged) == pytest.approx(expected, abs=0.01)

    def test_zero_numerator(self):
        assert carbon_intensity_metric(0.0, 100.0) == 0.0

    def test_zero_charged_is_undefined(self):
        assert carbon_intensity_metric(5.0, 0.0) is None


class TestReSelfConsumption:
    def test_ratio(self):
        assert re_self_consumption(40.0, 80.0) == pytest.approx(0.5)

    def test_no_renewables(self):
        assert re_self_consumption(0.0, 0.0) is None

    def test_full_absorption(self):
        assert re_self_consumption(12.0, 12.0) == 1.0

    def test_rejects_used_above_available(self):
        with pytest.raises(EmissionError):
            re_self_consumption(2.0, 1.0)


class TestEmissionLedger:
    def test_total_is_sum(self):
        ledger = EmissionLedger()
        rng = np.random.default_rng(0)
        values = rng.uniform(0, 2, 96)
        for v in values:
            ledger.record(float(v), 1.0)
        assert ledger.total_kg == pytest.approx(float(values.sum()), rel=1e-9)
        assert ledger.total_charged_kwh == pytest.approx(96.0)

    def test_zero_import_episode_is_exactly_zero(self):
        ledger = EmissionLedger()
        for _ in range(96):
            ledger.record(step_emission(0.0, 0.4), 2.0)
        assert ledger.total_kg == 0.0

    def test_rejects_negative_step(self):
        ledger = EmissionLedger()
        with pytest.raises(EmissionError):
            ledger.record(-0.1, 1.0)
