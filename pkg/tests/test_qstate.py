import math

import numpy as np
import pytest
from scipy.stats import chisquare

from ionlink import qstate as qs
from ionlink.qstate import (
    BellKind,
    ChshSettings,
    MeasurementSetting,
    StateInvariantError,
    TwoQubitDensity,
)

SQRT2 = math.sqrt(2.0)


class TestBellState:
    def test_plus_zero_phase_entries(self):
        rho = qs.bell_state(BellKind.PLUS, 0.0)
        m = rho.matrix
        for i, j in ((1, 1), (1, 2), (2, 1), (2, 2)):
            assert m[i, j] == pytest.approx(0.5, abs=1e-12)
            assert m[i, j].imag == pytest.approx(0.0, abs=1e-12)
        assert np.abs(m).sum() == pytest.approx(2.0, abs=1e-12)

    def test_pi_phase_flips_sign(self):
        # e^{i pi} = -1 turns the plus state into the minus state; check by
        # direct matrix product rather than by the fidelity shortcut
        plus_pi = qs.bell_state(BellKind.PLUS, math.pi)
        plus = qs.bell_state(BellKind.PLUS, 0.0)
        overlap = np.trace(plus_pi.matrix @ plus.matrix).real
        assert overlap == pytest.approx(0.0, abs=1e-12)
        assert qs.fidelity(plus, plus_pi) == pytest.approx(0.0, abs=1e-12)

    def test_trace_one_any_phase(self):
        assert qs.bell_state(BellKind.MINUS, 1.3).trace() == pytest.approx(1.0, abs=1e-12)

    def test_rank_one(self):
        eigs = qs.bell_state(BellKind.PLUS, 0.7).eigenvalues()
        assert eigs.max() == pytest.approx(1.0, abs=1e-12)


class TestFidelity:
    def test_identity(self):
        b = qs.bell_state(BellKind.PLUS, 0.0)
        assert qs.fidelity(b, b) == pytest.approx(1.0, abs=1e-12)

    def test_linear_in_mixture_weight(self):
        # <psi+|dndn> = 0, so overlap is linear in the Bell weight
        b = qs.bell_state(BellKind.PLUS, 0.0)
        mixed = qs.mix(b, qs.down_down(), 0.9)
        assert qs.fidelity(mixed, b) == pytest.approx(0.9, abs=1e-12)

    def test_maximally_mixed(self):
        assert qs.fidelity(qs.maximally_mixed(), qs.bell_state(BellKind.PLUS, 0.0)) == pytest.approx(0.25, abs=1e-12)

    def test_rejects_mixed_target(self):
        with pytest.raises(ValueError, match="rank-1"):
            qs.fidelity(qs.bell_state(BellKind.PLUS, 0.0), qs.maximally_mixed())


class TestPauliExpectation:
    def test_zz_anticorrelated(self):
        b = qs.bell_state(BellKind.PLUS, 0.0)
        assert qs.pauli_expectation(b, "Z", "Z") == pytest.approx(-1.0, abs=1e-12)

    def test_xx_plus_one(self):
        # expand psi+ in the X basis: both qubits flip together
        b = qs.bell_state(BellKind.PLUS, 0.0)
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        oracle = np.trace(b.matrix @ np.kron(x, x)).real
        assert oracle == pytest.approx(1.0, abs=1e-12)
        assert qs.pauli_expectation(b, "X", "X") == pytest.approx(1.0, abs=1e-12)

    def test_xx_rotated_phase(self):
        b = qs.bell_state(BellKind.PLUS, math.pi / 2.0)
        assert qs.pauli_expectation(b, "X", "X") == pytest.approx(0.0, abs=1e-12)

    def test_angle_settings_match_axes(self):
        rho = qs.random_density(np.random.default_rng(11))
        assert qs.pauli_expectation(rho, 0.0, math.pi / 2.0) == pytest.approx(
            qs.pauli_expectation(rho, "Z", "X"), abs=1e-12
        )


class TestChannels:
    def test_dephasing_identity(self):
        rho = qs.random_density(np.random.default_rng(1))
        out = qs.apply_dephasing(rho, 1.0)
        assert np.allclose(out.matrix, rho.matrix, atol=1e-14)

    def test_full_dephasing_classicalises(self):
        b = qs.bell_state(BellKind.PLUS, 0.0)
        out = qs.apply_dephasing(b, 0.0)
        assert qs.pauli_expectation(out, "X", "X") == pytest.approx(0.0, abs=1e-12)
        assert qs.pauli_expectation(out, "Z", "Z") == pytest.approx(-1.0, abs=1e-12)

    def test_dephasing_fidelity_closed_form(self):
        b = qs.bell_state(BellKind.PLUS, 0.0)
        for lam in (0.0, 0.3, 0.986, 1.0):
            out = qs.apply_dephasing(b, lam)
            # closed form (1 + lam) / 2, cross-checked by matrix evaluation
            direct = np.trace(out.matrix @ b.matrix).real
            assert direct == pytest.approx((1.0 + lam) / 2.0, abs=1e-12)
            assert qs.fidelity(out, b) == pytest.approx((1.0 + lam) / 2.0, abs=1e-12)

    def test_dephasing_rejects_bad_factor(self):
        b = qs.bell_state(BellKind.PLUS, 0.0)
        for lam in (-0.1, 1.1):
            with pytest.raises(ValueError):
                qs.apply_dephasing(b, lam)

    def test_depolarizing_limits(self):
        rho = qs.random_density(np.random.default_rng(2))
        assert np.allclose(qs.apply_depolarizing(rho, 0.0).matrix, rho.matrix, atol=1e-14)
        assert np.allclose(qs.apply_depolarizing(rho, 1.0).matrix, np.eye(4) / 4.0, atol=1e-14)

    def test_depolarizing_fidelity(self):
        b = qs.bell_state(BellKind.PLUS, 0.0)
        out = qs.apply_depolarizing(b, 0.04)
        assert qs.fidelity(out, b) == pytest.approx(0.96 + 0.04 * 0.25, abs=1e-12)

    def test_mix_limits_and_trace(self):
        b = qs.bell_state(BellKind.PLUS, 0.0)
        d = qs.down_down()
        assert np.allclose(qs.mix(b, d, 1.0).matrix, b.matrix)
        assert np.allclose(qs.mix(b, d, 0.0).matrix, d.matrix)
        assert qs.mix(b, d, 0.37).trace() == pytest.approx(1.0, abs=1e-12)
        with pytest.raises(ValueError):
            qs.mix(b, d, 1.2)

    def test_random_channel_compositions_preserve_invariants(self):
        rng = np.random.default_rng(42)
        for _ in range(500):
            rho = qs.random_density(rng)
            for _ in range(3):
                op = rng.integers(3)
                if op == 0:
                    rho = qs.apply_dephasing(rho, rng.random())
                elif op == 1:
                    rho = qs.apply_depolarizing(rho, rng.random())
                else:
                    rho = qs.mix(rho, qs.random_density(rng), rng.random())
            # constructor re-validates Hermiticity, trace and positivity
            TwoQubitDensity(rho.matrix)


class TestMeasurePair:
    def test_zz_outcomes_anticorrelated(self):
        b = qs.bell_state(BellKind.PLUS, 0.0)
        rng = np.random.default_rng(5)
        for _ in range(1000):
            a, bb = qs.measure_pair(b, 0.0, 0.0, rng)
            assert a != bb

    def test_maximally_mixed_uniform(self):
        rng = np.random.default_rng(6)
        rho = qs.maximally_mixed()
        counts = [0, 0, 0, 0]
        for _ in range(10000):
            a, b = qs.measure_pair(rho, 0.4, -1.1, rng)
            counts[2 * a + b] += 1
        _, pvalue = chisquare(counts)
        assert pvalue > 1e-3

    def test_born_probability_at_angle(self):
        # P(a = b) = sin^2(pi/8) for psi+ at (0, pi/4)
        b = qs.bell_state(BellKind.PLUS, 0.0)
        rng = np.random.default_rng(7)
        n = 100_000
        hits = sum(
            1 for _ in range(n) if (lambda ab: ab[0] == ab[1])(qs.measure_pair(b, 0.0, math.pi / 4.0, rng))
        )
        p_expected = math.sin(math.pi / 8.0) ** 2
        sigma = math.sqrt(p_expected * (1.0 - p_expected) / n)
        assert abs(hits / n - p_expected) < 3.0 * sigma

    def test_empirical_joint_matches_born(self):
        rng = np.random.default_rng(8)
        rho = qs.random_density(np.random.default_rng(123))
        sa, sb = 0.8, -0.5
        probs = qs.joint_outcome_probabilities(rho, sa, sb)
        n = 100_000
        counts = np.zeros(4)
        for _ in range(n):
            a, b = qs.measure_pair(rho, sa, sb, rng)
            counts[2 * a + b] += 1
        for k in range(4):
            sigma = math.sqrt(probs[k] * (1.0 - probs[k]) / n)
            assert abs(counts[k] / n - probs[k]) < 4.0 * sigma


class TestChsh:
    def test_maximal_violation_plus_state(self):
        b = qs.bell_state(BellKind.PLUS, 0.0)
        settings = ChshSettings.from_angles(0.0, math.pi / 2.0, 3.0 * math.pi / 4.0, -3.0 * math.pi / 4.0)
        assert qs.chsh_value(b, settings) == pytest.approx(2.0 * SQRT2, abs=1e-12)

    def test_maximal_violation_minus_state(self):
        b = qs.bell_state(BellKind.MINUS, 0.0)
        settings = ChshSettings.from_angles(0.0, math.pi / 2.0, math.pi / 4.0, -math.pi / 4.0)
        assert qs.chsh_value(b, settings) == pytest.approx(-2.0 * SQRT2, abs=1e-12)

    def test_product_state_termwise(self):
        # separable |dn dn>: E(a, b) = cos(theta_a) cos(theta_b) termwise
        settings = ChshSettings.from_angles(0.0, math.pi / 2.0, math.pi / 4.0, -math.pi / 4.0)
        oracle = (
            math.cos(0) * math.cos(math.pi / 4)
            + math.cos(0) * math.cos(-math.pi / 4)
            + math.cos(math.pi / 2) * math.cos(math.pi / 4)
            - math.cos(math.pi / 2) * math.cos(-math.pi / 4)
        )
        assert oracle == pytest.approx(SQRT2, abs=1e-12)
        assert qs.chsh_value(qs.down_down(), settings) == pytest.approx(SQRT2, abs=1e-12)

    def test_linear_in_werner_visibility(self):
        settings = ChshSettings.from_angles(0.0, math.pi / 2.0, 3.0 * math.pi / 4.0, -3.0 * math.pi / 4.0)
        b = qs.bell_state(BellKind.PLUS, 0.0)
        s_pure = qs.chsh_value(b, settings)
        for v in (0.9, 0.5, 0.1):
            werner = qs.mix(b, qs.maximally_mixed(), v)
            assert qs.chsh_value(werner, settings) == pytest.approx(v * s_pure, abs=1e-12)
        assert 0.9 * s_pure == pytest.approx(2.5456, abs=1e-4)

    def test_tsirelson_bound_random(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            rho = qs.random_density(rng)
            settings = ChshSettings.from_angles(*rng.uniform(-math.pi, math.pi, size=4))
            assert abs(qs.chsh_value(rho, settings)) <= 2.0 * SQRT2 + 1e-9

    def test_separable_bound_random(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            # random mixture of product states stays within the classical bound
            m = np.zeros((4, 4), dtype=complex)
            weights = rng.dirichlet(np.ones(3))
            for w in weights:
                va = rng.normal(size=2) + 1j * rng.normal(size=2)
                vb = rng.normal(size=2) + 1j * rng.normal(size=2)
                va /= np.linalg.norm(va)
                vb /= np.linalg.norm(vb)
                vec = np.kron(va, vb)
                m += w * np.outer(vec, vec.conj())
            rho = TwoQubitDensity(m)
            settings = ChshSettings.from_angles(*rng.uniform(-math.pi, math.pi, size=4))
            assert abs(qs.chsh_value(rho, settings)) <= 2.0 + 1e-9


class TestValidation:
    def test_setting_angle_normalised(self):
        assert MeasurementSetting(3.0 * math.pi).theta == pytest.approx(-math.pi)
        assert -math.pi <= MeasurementSetting(123.4).theta < math.pi

    def test_non_hermitian_rejected(self):
        m = np.eye(4, dtype=complex) / 4.0
        m[0, 1] = 0.3
        with pytest.raises(StateInvariantError):
            TwoQubitDensity(m)

    def test_bad_trace_rejected(self):
        with pytest.raises(StateInvariantError):
            TwoQubitDensity(np.eye(4, dtype=complex))

    def test_negative_eigenvalue_rejected(self):
        m = np.diag([0.6, 0.5, -0.1, 0.0]).astype(complex)
        with pytest.raises(StateInvariantError):
            TwoQubitDensity(m)

    def test_states_immutable(self):
        rho = qs.maximally_mixed()
        with pytest.raises(AttributeError):
            rho.matrix = np.eye(4)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 9.0
