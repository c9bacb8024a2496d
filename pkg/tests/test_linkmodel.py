import math
from dataclasses import replace

import pytest

from ionlink import linkmodel
from ionlink.linkmodel import LinkBudget, RateCurve


@pytest.fixture
def budget():
    return LinkBudget()  # calibrated 10 km defaults


class TestFibreTransmittance:
    def test_zero_length(self, budget):
        assert linkmodel.fibre_transmittance(replace(budget, fibre_length_km=0.0)) == 1.0

    def test_ten_km(self, budget):
        assert linkmodel.fibre_transmittance(budget) == pytest.approx(10 ** -0.18, rel=1e-12)
        assert linkmodel.fibre_transmittance(budget) == pytest.approx(0.6607, abs=1e-4)

    def test_hundred_km(self, budget):
        b = replace(budget, fibre_length_km=100.0)
        assert linkmodel.fibre_transmittance(b) == pytest.approx(10 ** -1.8, rel=1e-12)
        assert linkmodel.fibre_transmittance(b) == pytest.approx(0.0158, abs=1e-4)


class TestArmEfficiency:
    def test_all_factors_one(self):
        b = LinkBudget(
            fibre_coupled_eff_a=1.0, fibre_coupled_eff_b=1.0, qfc_chain_eff=1.0,
            fibre_length_km=0.0, detector_eff=1.0, residual_a=1.0, residual_b=1.0,
        )
        assert linkmodel.arm_efficiency(b, "A") == 1.0
        assert linkmodel.arm_efficiency(b, "B") == 1.0

    def test_calibrated_anchor(self, budget):
        assert linkmodel.arm_efficiency(budget, "A") == pytest.approx(0.091, abs=5e-3)
        assert linkmodel.arm_efficiency(budget, "B") == pytest.approx(0.091, abs=5e-3)

    def test_hundred_km_scales_by_transmittance_ratio(self, budget):
        far = replace(budget, fibre_length_km=100.0)
        ratio = linkmodel.fibre_transmittance(far) / linkmodel.fibre_transmittance(budget)
        expected = 0.091 * ratio
        assert linkmodel.arm_efficiency(far, "A") == pytest.approx(expected, rel=1e-9)
        assert expected == pytest.approx(0.0022, abs=1e-4)

    def test_monotone_in_length_and_attenuation(self, budget):
        effs = [
            linkmodel.arm_efficiency(replace(budget, fibre_length_km=L), "A")
            for L in (0.0, 5.0, 10.0, 50.0, 100.0, 200.0)
        ]
        assert all(a >= b for a, b in zip(effs, effs[1:]))
        effs = [
            linkmodel.arm_efficiency(replace(budget, attenuation_db_per_km=att), "A")
            for att in (0.0, 0.1, 0.18, 0.25, 0.5)
        ]
        assert all(a >= b for a, b in zip(effs, effs[1:]))

    def test_unknown_arm(self, budget):
        with pytest.raises(ValueError, match="arm"):
            linkmodel.arm_efficiency(budget, "C")


class TestHeraldProb:
    def test_zero_alpha(self, budget):
        assert linkmodel.herald_prob(budget, 0.0) == 0.0

    def test_first_order_linear(self, budget):
        for alpha in (0.005, 0.01, 0.025):
            ratio = linkmodel.herald_prob(budget, 2 * alpha) / linkmodel.herald_prob(budget, alpha)
            assert ratio == pytest.approx(2.0, rel=0.01)

    def test_range_check(self, budget):
        with pytest.raises(ValueError):
            linkmodel.herald_prob(budget, 1.5)


class TestExpectedRate:
    def test_calibrated_anchor(self, budget):
        assert linkmodel.expected_rate(budget, 0.17) == pytest.approx(2.226, abs=0.05)
        assert linkmodel.mean_generation_time(budget, 0.17) == pytest.approx(0.45, abs=0.005)

    def test_key_run_rate_near_measured(self, budget):
        # measured long-run average was 0.291/s including operational pauses
        rate = linkmodel.expected_rate(budget, 0.025)
        assert abs(rate - 0.291) / 0.291 < 0.15

    def test_zero_duty_cycle(self, budget):
        assert linkmodel.expected_rate(replace(budget, duty_cycle=0.0), 0.17) == 0.0
        assert linkmodel.mean_generation_time(replace(budget, duty_cycle=0.0), 0.17) == math.inf

    def test_monotone_in_alpha(self, budget):
        alphas = [0.01 * k for k in range(51)]
        rates = [linkmodel.expected_rate(budget, a) for a in alphas]
        assert all(r2 >= r1 for r1, r2 in zip(rates, rates[1:]))

    def test_linear_trend_small_alpha(self, budget):
        # rate(a2)/rate(a1) tracks a2/a1 within 3% below alpha = 0.05
        pairs = [(0.01, 0.05), (0.02, 0.04), (0.025, 0.05)]
        for a1, a2 in pairs:
            ratio = linkmodel.expected_rate(budget, a2) / linkmodel.expected_rate(budget, a1)
            assert ratio == pytest.approx(a2 / a1, rel=0.03)


class TestFalseHerald:
    def test_zero_noise(self, budget):
        assert linkmodel.false_herald_prob(replace(budget, noise_cps=0.0)) == 0.0

    def test_closed_form(self, budget):
        assert linkmodel.false_herald_prob(budget) == pytest.approx(1.92e-6, rel=1e-12)

    def test_clamped_at_one(self, budget):
        assert linkmodel.false_herald_prob(replace(budget, noise_cps=1e12)) == 1.0

    def test_linear_in_noise_and_window(self, budget):
        base = linkmodel.false_herald_prob(budget)
        assert linkmodel.false_herald_prob(replace(budget, noise_cps=19.2)) == pytest.approx(2 * base)
        assert linkmodel.false_herald_prob(replace(budget, gate_window_s=2e-7)) == pytest.approx(2 * base)


class TestSnr:
    def test_operating_point_exceeds_hundred(self, budget):
        assert linkmodel.snr(budget, 0.025) > 100.0

    def test_noise_doubling_halves_snr(self, budget):
        base = linkmodel.snr(budget, 0.025)
        assert linkmodel.snr(replace(budget, noise_cps=19.2), 0.025) == pytest.approx(base / 2)

    def test_zero_alpha(self, budget):
        assert linkmodel.snr(budget, 0.0) == 0.0

    def test_zero_noise_sentinel(self, budget):
        assert linkmodel.snr(replace(budget, noise_cps=0.0), 0.025) == math.inf


class TestValidation:
    def test_rate_curve(self, budget):
        curve = linkmodel.rate_curve(budget, [0.01, 0.02, 0.05])
        assert len(curve.alphas) == len(curve.rates_cps) == 3
        with pytest.raises(ValueError):
            RateCurve(alphas=(0.1, 0.2), rates_cps=(1.0,))
        with pytest.raises(ValueError):
            RateCurve(alphas=(0.1,), rates_cps=(-1.0,))

    def test_budget_field_ranges(self):
        with pytest.raises(ValueError, match="detector_eff"):
            LinkBudget(detector_eff=1.5)
        with pytest.raises(ValueError, match="gate_window_s"):
            LinkBudget(gate_window_s=1.0)
        with pytest.raises(ValueError, match="noise_cps"):
            LinkBudget(noise_cps=-1.0)
