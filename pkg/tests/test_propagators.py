"""
Unit tests for the propagators module.
"""

import math
import sys
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest
from scipy import integrate, special

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from hilbert import FieldMode, SpacetimePoint, field_operator
from propagators import (
    FrequencyKernel,
    KernelComponent,
    PropagatorPoint,
    TestFunction,
    d_advanced,
    d_feynman,
    d_retarded,
    d_timesym,
    factorization_check,
    factorize,
    nascent_delta,
    propagator_row,
    smeared_frequency_pairing,
    smeared_pairing,
    sokhotski_split,
)
from utils import DimensionMismatchError, QuadratureError, SimulationError, fit_convergence_order


SAMPLE_POINTS = [
    PropagatorPoint(2.0, 0.0, 0.01),
    PropagatorPoint(1.0, 1.0, 0.1),
    PropagatorPoint(-0.3, 2.5, 1e-4),
    PropagatorPoint(3.7, 1.2, 0.5),
    PropagatorPoint(0.0, 0.0, 1e-3),
]


def voigt_pairing(center: float, width: float, epsilon: float) -> complex:
    """Exact pairing of 1/(x + i epsilon) with a Gaussian, via the Faddeeva function."""
    z = complex(-center, epsilon) / (width * math.sqrt(2.0))
    return math.sqrt(math.pi) / (width * math.sqrt(2.0)) * (-1j) * np.conj(special.wofz(z))


class TestPropagatorPoint:
    """Tests for PropagatorPoint validation."""

    def test_k_squared(self):
        """Test the invariant uses the (+,-,-,-) signature."""
        assert PropagatorPoint(3.0, 2.0, 0.1).k_squared == 5.0

    def test_nonpositive_epsilon(self):
        """Test epsilon must be positive."""
        with pytest.raises(SimulationError):
            PropagatorPoint(1.0, 0.0, 0.0)

    def test_negative_k_abs(self):
        """Test k_abs must be non-negative."""
        with pytest.raises(SimulationError):
            PropagatorPoint(1.0, -1.0, 0.1)


class TestPropagators:
    """Tests for the pointwise propagators."""

    def test_feynman_value(self):
        """Test D_F at k² = 2, ε = 0.1."""
        value = d_feynman(PropagatorPoint(2.0, math.sqrt(2.0), 0.1))
        assert abs(value - (2 - 0.1j) / 4.01) < 1e-12
        assert abs(value - (0.49875 - 0.02494j)) < 1e-5

    def test_feynman_on_shell(self):
        """Test D_F on shell is pure imaginary."""
        value = d_feynman(PropagatorPoint(1.0, 1.0, 0.1))
        assert abs(value - (-10j)) < 1e-12

    @pytest.mark.parametrize("p", SAMPLE_POINTS)
    def test_feynman_imaginary_part_nonpositive(self, p):
        """Test Im D_F <= 0."""
        assert d_feynman(p).imag <= 0

    @pytest.mark.parametrize("p", SAMPLE_POINTS)
    def test_advanced_is_conjugate(self, p):
        """Test D_adv = conj(D_ret)."""
        assert abs(d_advanced(p) - np.conj(d_retarded(p))) <= 1e-15 * max(1.0, abs(d_retarded(p)))

    @pytest.mark.parametrize("p", SAMPLE_POINTS)
    def test_frequency_reflection(self, p):
        """Test D_ret(−k0) = D_adv(k0)."""
        reflected = PropagatorPoint(-p.k0, p.k_abs, p.epsilon)
        assert d_retarded(reflected) == d_advanced(p)

    def test_retarded_value(self):
        """Test D_ret at k0 = 2, k_abs = 0, ε = 0.01."""
        value = d_retarded(PropagatorPoint(2.0, 0.0, 0.01))
        assert abs(value - 1 / (2 + 0.01j) ** 2) < 1e-15
        assert abs(value - (0.24998 - 0.0025j)) < 1e-5

    @pytest.mark.parametrize("p", SAMPLE_POINTS)
    def test_timesym_real_mean(self, p):
        """Test D̄ is the real mean of D_ret and D_adv."""
        value = d_timesym(p)
        mean = (d_retarded(p) + d_advanced(p)) / 2
        assert abs(value - mean) <= 1e-15 * max(1.0, abs(value))
        assert abs(value.imag) <= 1e-15

    def test_timesym_limit(self):
        """Test D̄ → 1/k0² as ε → 0."""
        assert abs(d_timesym(PropagatorPoint(2.0, 0.0, 1e-8)) - 0.25) < 1e-12


class TestSokhotskiSplit:
    """Tests for sokhotski_split."""

    @pytest.mark.parametrize("p", SAMPLE_POINTS)
    def test_reassembly(self, p):
        """Test P − iπδ = D_F."""
        principal, delta = sokhotski_split(p)
        feynman = d_feynman(p)
        assert abs(complex(principal, -math.pi * delta) - feynman) <= 1e-15 * max(1.0, abs(feynman))

    def test_on_shell_peak(self):
        """Test x = 0 gives P = 0 and δ = 1/(πε)."""
        principal, delta = sokhotski_split(PropagatorPoint(1.0, 1.0, 0.01))
        assert principal == 0
        assert abs(delta - 1 / (math.pi * 0.01)) < 1e-12

    def test_delta_unit_mass(self):
        """Test ∫δ_ε = 1 over the real line."""
        epsilon = 1e-2
        left, _ = integrate.quad(nascent_delta, -np.inf, -1.0, args=(epsilon,))
        middle, _ = integrate.quad(nascent_delta, -1.0, 1.0, args=(epsilon,), points=[0.0])
        right, _ = integrate.quad(nascent_delta, 1.0, np.inf, args=(epsilon,))
        assert abs(left + middle + right - 1.0) < 1e-8

    def test_row(self):
        """Test the table row carries every component."""
        row = propagator_row(PropagatorPoint(2.0, 1.0, 0.1))
        assert row["k_squared"] == 3.0
        assert row["reassembly_error"] < 1e-15
        assert set(row) >= {"d_feynman", "d_retarded", "d_advanced", "d_timesym", "principal", "delta"}


class TestTestFunction:
    """Tests for the Gaussian test function."""

    def test_unit_integral(self):
        """Test ∫g = 1."""
        g = TestFunction(center=1.3, width=0.7)
        lower, upper = g.window()
        total, _ = integrate.quad(g, lower, upper)
        assert abs(total - 1.0) < 1e-10

    def test_nonpositive_width(self):
        """Test width must be positive."""
        with pytest.raises(SimulationError):
            TestFunction(center=0.0, width=0.0)


class TestSmearedPairing:
    """Tests for distributional pairings."""

    def test_delta_unit_gaussian(self):
        """Test δ_ε paired with N(0, 1) at ε = 1e-3 gives 1/√(2π)."""
        value = smeared_pairing(KernelComponent.DELTA, TestFunction(0.0, 1.0), 1e-3)
        assert abs(value - 1 / math.sqrt(2 * math.pi)) < 1e-5
        assert value.imag == 0

    def test_principal_even_function(self):
        """Test P_ε paired with an even function vanishes."""
        value = smeared_pairing(KernelComponent.PRINCIPAL, TestFunction(0.0, 1.0), 1e-2)
        assert abs(value) < 1e-12

    def test_delta_off_center(self):
        """Test δ_ε paired with a Gaussian far from the pole gives g(0)."""
        g = TestFunction(center=3.0, width=0.5)
        value = smeared_pairing(KernelComponent.DELTA, g, 1e-3)
        assert abs(g(0.0) - 1.2e-8) < 1e-9
        assert abs(value - g(0.0)) < 1e-9

    def test_raw_pairing_matches_voigt(self):
        """Test the raw Feynman pairing against the Faddeeva closed form."""
        center, width, epsilon = 0.7, 0.4, 0.05
        value = smeared_pairing(
            KernelComponent.FEYNMAN, TestFunction(center, width), epsilon, extrapolate=False
        )
        assert abs(value - voigt_pairing(center, width, epsilon)) < 1e-10

    def test_raw_delta_is_first_order(self):
        """Test the unextrapolated delta pairing carries an O(ε) bias."""
        g = TestFunction(0.0, 1.0)
        raw = smeared_pairing(KernelComponent.DELTA, g, 1e-2, extrapolate=False)
        assert abs(raw.real - (g(0.0) - 1e-2 / math.pi)) < 1e-4

    def test_convergence_order(self):
        """Test the delta pairing converges to g(0) at second order."""
        g = TestFunction(0.0, 1.0)
        epsilons = [1e-1, 1e-2, 1e-3, 1e-4]
        errors = [abs(smeared_pairing(KernelComponent.DELTA, g, e) - g(0.0)) for e in epsilons]
        assert fit_convergence_order(epsilons, errors) >= 1.9

    def test_quadrature_failure(self):
        """Test a large residual raises with the estimate attached."""
        with patch("propagators.integrate.quad", return_value=(0.0, 1.0)):
            with pytest.raises(QuadratureError) as excinfo:
                smeared_pairing(KernelComponent.DELTA, TestFunction(0.0, 1.0), 1e-2)
        assert excinfo.value.context["residual"] > 0

    def test_nonpositive_epsilon(self):
        """Test epsilon must be positive."""
        with pytest.raises(SimulationError):
            smeared_pairing(KernelComponent.DELTA, TestFunction(0.0, 1.0), 0.0)


class TestFrequencyPairing:
    """Tests for pairings over k0."""

    def test_feynman_real_matches_timesym_in_limit(self):
        """Test smeared Re D_F − D̄ shrinks with ε."""
        g = TestFunction(center=1.5, width=0.5)
        kernel = FrequencyKernel.FEYNMAN_REAL_MINUS_TIMESYM
        coarse = abs(smeared_frequency_pairing(kernel, g, 1e-2, k_abs=1.0))
        fine = abs(smeared_frequency_pairing(kernel, g, 1e-3, k_abs=1.0))
        assert coarse > 0
        assert fine / coarse < 0.2

    def test_retarded_advanced_conjugate(self):
        """Test the smeared retarded and advanced propagators are conjugate."""
        g = TestFunction(center=0.5, width=1.0)
        ret = smeared_frequency_pairing(FrequencyKernel.RETARDED, g, 0.05, k_abs=1.0)
        adv = smeared_frequency_pairing(FrequencyKernel.ADVANCED, g, 0.05, k_abs=1.0)
        assert abs(ret - np.conj(adv)) < 1e-9


class TestFactorization:
    """Tests for the one-photon factorization check."""

    @pytest.mark.parametrize("n_modes", [1, 4, 16])
    def test_deviation(self, n_modes):
        """Test direct and mode-sum values agree."""
        rng = np.random.default_rng(n_modes)
        modes = [FieldMode(rng.normal(size=3), 1 + i % 2) for i in range(n_modes)]
        for _ in range(10):
            x = SpacetimePoint(rng.normal(size=3), rng.normal())
            y = SpacetimePoint(rng.normal(size=3), rng.normal())
            report = factorization_check(modes, x, y, volume=2.0, component=1)
            assert report.max_abs_deviation <= 1e-12
            assert report.n_modes == n_modes

    def test_coincident_points(self):
        """Test x = y gives Σ 1/(2ωV) for x-polarized modes."""
        modes = [FieldMode([0, 0, 1]), FieldMode([0, 0, 2]), FieldMode([0, 0, -3])]
        point = SpacetimePoint([0.4, 0.1, -0.2], 0.5)
        report = factorization_check(modes, point, point, volume=1.5)
        expected = sum(1 / (2 * w * 1.5) for w in (1.0, 2.0, 3.0))
        assert abs(report.direct_value - expected) < 1e-12

    def test_single_mode(self):
        """Test the one-term sum."""
        mode = FieldMode([0.0, 0.0, 2.0])
        x = SpacetimePoint([0.0, 0.0, 1.0], 0.5)
        y = SpacetimePoint([0.0, 0.0, 0.25], 0.0)
        report = factorization_check([mode], x, y, volume=1.0)
        expected = (1 / 4) * np.exp(1j * (2 * 0.75 - 2 * 0.5))
        assert abs(report.direct_value - expected) < 1e-14
        assert abs(report.mode_sum_value - expected) < 1e-14

    def test_inconsistent_bases(self):
        """Test operators on different mode bases are rejected."""
        origin = SpacetimePoint([0, 0, 0])
        op_x = field_operator([FieldMode([1, 0, 0])], origin, 1.0)
        op_y = field_operator([FieldMode([0, 1, 0])], origin, 1.0)
        with pytest.raises(DimensionMismatchError):
            factorize(op_x, op_y)

    def test_empty_modes(self):
        """Test an empty mode list raises."""
        with pytest.raises(SimulationError):
            factorization_check([], SpacetimePoint([0, 0, 0]), SpacetimePoint([0, 0, 0]), 1.0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
