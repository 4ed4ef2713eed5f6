"""
Regularized momentum-space propagators of the massless field.

This module evaluates the Feynman, retarded, advanced and time-symmetric
Green's functions with a Lorentzian (i·epsilon) regulator, splits the
Feynman propagator into its principal-value and delta parts, pairs the
regularized distributions with smooth test functions by adaptive quadrature,
and checks that the vacuum two-point function of the field factorizes into a
sum over one-photon insertions.

Metric signature is (+, -, -, -), so k² = k0² - |k|².
"""

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy import integrate

from hilbert import ModeBasis, Operator, SpacetimePoint, field_operator
from utils import DimensionMismatchError, QuadratureError, SimulationError, logger


# Adaptive quadrature settings
QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 200

# Residual above which a pairing is reported as not converged
QUAD_ACCEPT_ABS = 1e-8
QUAD_ACCEPT_REL = 1e-6

# Test functions are integrated over center ± WINDOW_WIDTHS widths
WINDOW_WIDTHS = 8.0

# Extra breakpoints around each pole, in units of epsilon
POLE_BREAKPOINTS = (1.0, 10.0, 100.0)


@dataclass(frozen=True)
class PropagatorPoint:
    """
    Momentum argument of a propagator.

    Attributes:
        k0: Frequency component.
        k_abs: Magnitude of the spatial wave vector.
        epsilon: Regulator, strictly positive.
    """
    k0: float
    k_abs: float
    epsilon: float

    def __post_init__(self):
        for name in ("k0", "k_abs", "epsilon"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise SimulationError(f"{name} must be finite", {name: value})
            object.__setattr__(self, name, value)
        if self.epsilon <= 0:
            raise SimulationError("epsilon must be positive", {"epsilon": self.epsilon})
        if self.k_abs < 0:
            raise SimulationError("k_abs must be non-negative", {"k_abs": self.k_abs})

    @property
    def k_squared(self) -> float:
        """Invariant k² = k0² − k_abs²."""
        return self.k0**2 - self.k_abs**2


def _feynman(k0: float, k_abs: float, epsilon: float) -> complex:
    return 1.0 / (k0**2 - k_abs**2 + 1j * epsilon)


def _retarded(k0: float, k_abs: float, epsilon: float) -> complex:
    return 1.0 / ((k0 + 1j * epsilon) ** 2 - k_abs**2)


def _advanced(k0: float, k_abs: float, epsilon: float) -> complex:
    return 1.0 / ((k0 - 1j * epsilon) ** 2 - k_abs**2)


def _timesym(k0: float, k_abs: float, epsilon: float) -> complex:
    return 0.5 * _retarded(k0, k_abs, epsilon) + 0.5 * _advanced(k0, k_abs, epsilon)


def d_feynman(p: PropagatorPoint) -> complex:
    """D_F = 1/(k² + iε). The imaginary part is never positive."""
    return _feynman(p.k0, p.k_abs, p.epsilon)


def d_retarded(p: PropagatorPoint) -> complex:
    """D_ret = 1/((k0 + iε)² − |k|²)."""
    return _retarded(p.k0, p.k_abs, p.epsilon)


def d_advanced(p: PropagatorPoint) -> complex:
    """D_adv = 1/((k0 − iε)² − |k|²), the complex conjugate of D_ret."""
    return _advanced(p.k0, p.k_abs, p.epsilon)


def d_timesym(p: PropagatorPoint) -> complex:
    """Time-symmetric propagator, the mean of D_ret and D_adv."""
    return _timesym(p.k0, p.k_abs, p.epsilon)


def principal_part(x: float, epsilon: float) -> float:
    """Regularized principal value P_ε(x) = x/(x² + ε²)."""
    return x / (x * x + epsilon * epsilon)


def nascent_delta(x: float, epsilon: float) -> float:
    """Lorentzian nascent delta δ_ε(x) = ε/(π(x² + ε²))."""
    return epsilon / (math.pi * (x * x + epsilon * epsilon))


def sokhotski_split(p: PropagatorPoint) -> Tuple[float, float]:
    """
    Split D_F into principal and delta parts at x = k².

    1/(x + iε) = P_ε(x) − iπ δ_ε(x) holds for every finite ε.

    Returns:
        Tuple (P_ε(x), δ_ε(x)).
    """
    x = p.k_squared
    return principal_part(x, p.epsilon), nascent_delta(x, p.epsilon)


class SmearingShape(Enum):
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class TestFunction:
    """
    Normalized smooth test function used to pair distributions.

    Attributes:
        center: Location of the peak.
        width: Standard deviation, strictly positive.
        kind: Shape of the function (Gaussian only).
    """
    __test__ = False

    center: float = 0.0
    width: float = 1.0
    kind: SmearingShape = SmearingShape.GAUSSIAN

    def __post_init__(self):
        if not (math.isfinite(self.center) and math.isfinite(self.width)):
            raise SimulationError("Test function parameters must be finite")
        if self.width <= 0:
            raise SimulationError("Test function width must be positive", {"width": self.width})
        object.__setattr__(self, "kind", SmearingShape(self.kind))

    def __call__(self, x: float) -> float:
        z = (x - self.center) / self.width
        return math.exp(-0.5 * z * z) / (self.width * math.sqrt(2.0 * math.pi))

    def derivative(self, x: float) -> float:
        return -(x - self.center) / self.width**2 * self(x)

    def window(self) -> Tuple[float, float]:
        """Interval outside which the function is negligible."""
        half = WINDOW_WIDTHS * self.width
        return self.center - half, self.center + half


class KernelComponent(Enum):
    """Regularized distributions in the invariant x = k²."""
    FEYNMAN = "feynman"
    PRINCIPAL = "principal"
    DELTA = "delta"


class FrequencyKernel(Enum):
    """Propagators as functions of k0 at fixed |k|."""
    RETARDED = "retarded"
    ADVANCED = "advanced"
    TIMESYM = "timesym"
    FEYNMAN = "feynman"
    FEYNMAN_REAL_MINUS_TIMESYM = "feynman_real_minus_timesym"


_FREQUENCY_FUNCTIONS: Dict[FrequencyKernel, Callable[[float, float, float], complex]] = {
    FrequencyKernel.RETARDED: _retarded,
    FrequencyKernel.ADVANCED: _advanced,
    FrequencyKernel.TIMESYM: _timesym,
    FrequencyKernel.FEYNMAN: _feynman,
    FrequencyKernel.FEYNMAN_REAL_MINUS_TIMESYM: lambda k0, k, eps: complex(
        _feynman(k0, k, eps).real - _timesym(k0, k, eps).real
    ),
}


def _nodes(lower: float, upper: float, poles: Sequence[float], epsilon: float) -> List[float]:
    """Sorted integration breakpoints: window ends plus a ladder around each pole."""
    points = {lower, upper}
    for pole in poles:
        for offset in (0.0,) + tuple(s * epsilon for s in POLE_BREAKPOINTS):
            for candidate in (pole - offset, pole + offset):
                if lower < candidate < upper:
                    points.add(candidate)
    return sorted(points)


def _integrate_piecewise(func: Callable[[float], float], nodes: Sequence[float]) -> Tuple[float, float]:
    """Adaptive quadrature over consecutive node intervals; returns (value, residual)."""
    total = 0.0
    residual = 0.0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        for left, right in zip(nodes[:-1], nodes[1:]):
            value, error = integrate.quad(
                func, left, right, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT
            )
            total += value
            residual += error
    for warning in caught:
        logger.debug(f"Quadrature warning: {warning.message}")
    return total, residual


def _check_residual(value: complex, residual: float, what: str) -> None:
    if not math.isfinite(residual) or residual > QUAD_ACCEPT_ABS + QUAD_ACCEPT_REL * abs(value):
        raise QuadratureError(
            f"Quadrature for {what} did not converge",
            {"residual": residual, "value": value},
        )


def _invariant_pairing(
    kernel: KernelComponent, g: TestFunction, epsilon: float
) -> Tuple[complex, float]:
    """
    Pair a distribution in x = k² with g at a single regulator value.

    The constant and linear Taylor terms of g at the pole are integrated
    analytically; quadrature only sees the smooth remainder.
    """
    lower, upper = g.window()
    lower = min(lower, -POLE_BREAKPOINTS[-1] * epsilon)
    upper = max(upper, POLE_BREAKPOINTS[-1] * epsilon)
    nodes = _nodes(lower, upper, [0.0], epsilon)

    g0 = g(0.0)
    g1 = g.derivative(0.0)

    def remainder(x: float) -> float:
        return g(x) - g0 - g1 * x

    arctan_term = math.atan(upper / epsilon) - math.atan(lower / epsilon)
    log_term = 0.5 * math.log((upper**2 + epsilon**2) / (lower**2 + epsilon**2))

    delta = principal = 0.0
    residual = 0.0

    if kernel in (KernelComponent.DELTA, KernelComponent.FEYNMAN):
        tail, error = _integrate_piecewise(lambda x: nascent_delta(x, epsilon) * remainder(x), nodes)
        delta = g0 * arctan_term / math.pi + g1 * epsilon * log_term / math.pi + tail
        residual += error

    if kernel in (KernelComponent.PRINCIPAL, KernelComponent.FEYNMAN):
        tail, error = _integrate_piecewise(lambda x: principal_part(x, epsilon) * remainder(x), nodes)
        principal = g0 * log_term + g1 * ((upper - lower) - epsilon * arctan_term) + tail
        residual += error

    if kernel == KernelComponent.DELTA:
        value = complex(delta)
    elif kernel == KernelComponent.PRINCIPAL:
        value = complex(principal)
    else:
        value = complex(principal, -math.pi * delta)

    _check_residual(value, residual, f"{kernel.value} pairing at epsilon={epsilon:g}")
    return value, residual


def smeared_pairing(
    kernel: KernelComponent,
    g: TestFunction,
    epsilon: float,
    extrapolate: bool = True,
) -> complex:
    """
    Integrate a regularized distribution in x = k² against a test function.

    The Lorentzian regulator leaves an O(ε) bias in the raw pairing. With
    extrapolate=True (default) the pairing is evaluated at ε and ε/2 and
    combined as 2·I(ε/2) − I(ε), which cancels the linear term and leaves
    an O(ε²) error.

    Args:
        kernel: Which distribution to pair (delta, principal or Feynman).
        g: Test function.
        epsilon: Regulator, strictly positive.
        extrapolate: Apply the two-point extrapolation in ε.

    Returns:
        The pairing as a complex number.

    Raises:
        QuadratureError: If the adaptive quadrature does not converge.
    """
    kernel = KernelComponent(kernel)
    if not epsilon > 0:
        raise SimulationError("epsilon must be positive", {"epsilon": epsilon})

    coarse, _ = _invariant_pairing(kernel, g, epsilon)
    if not extrapolate:
        return coarse

    fine, _ = _invariant_pairing(kernel, g, epsilon / 2)
    return 2.0 * fine - coarse


def smeared_frequency_pairing(
    kernel: FrequencyKernel,
    g: TestFunction,
    epsilon: float,
    k_abs: float,
) -> complex:
    """
    Integrate a propagator over k0 at fixed |k| against a test function.

    No extrapolation is applied; breakpoints are placed around both mass-shell
    poles k0 = ±|k|.

    Raises:
        QuadratureError: If the adaptive quadrature does not converge.
    """
    kernel = FrequencyKernel(kernel)
    point = PropagatorPoint(g.center, k_abs, epsilon)
    function = _FREQUENCY_FUNCTIONS[kernel]

    lower, upper = g.window()
    poles = [0.0] if point.k_abs == 0 else [-point.k_abs, point.k_abs]
    nodes = _nodes(lower, upper, poles, epsilon)

    real, real_error = _integrate_piecewise(
        lambda k0: function(k0, point.k_abs, epsilon).real * g(k0), nodes
    )
    imag, imag_error = 0.0, 0.0
    if kernel != FrequencyKernel.FEYNMAN_REAL_MINUS_TIMESYM:
        imag, imag_error = _integrate_piecewise(
            lambda k0: function(k0, point.k_abs, epsilon).imag * g(k0), nodes
        )

    value = complex(real, imag)
    _check_residual(value, real_error + imag_error, f"{kernel.value} frequency pairing")
    return value


def propagator_row(p: PropagatorPoint) -> dict:
    """
    Evaluate every propagator component at one point.

    Returns:
        Dictionary with the inputs, the four propagators, the Sokhotski parts
        and the reassembly error |P − iπδ − D_F|.
    """
    feynman = d_feynman(p)
    principal, delta = sokhotski_split(p)
    return {
        "k0": p.k0,
        "k_abs": p.k_abs,
        "epsilon": p.epsilon,
        "k_squared": p.k_squared,
        "d_feynman": feynman,
        "d_retarded": d_retarded(p),
        "d_advanced": d_advanced(p),
        "d_timesym": d_timesym(p),
        "principal": principal,
        "delta": delta,
        "reassembly_error": abs(complex(principal, -math.pi * delta) - feynman),
    }


@dataclass(frozen=True)
class FactorizationReport:
    """
    Vacuum two-point function computed two ways.

    Attributes:
        direct_value: <0|A(x)A(y)|0> from the operator product.
        mode_sum_value: Sum over k of <0|A(x)|k><k|A(y)|0>.
        max_abs_deviation: |direct_value − mode_sum_value|.
        n_modes: Number of modes in the sector.
    """
    direct_value: complex
    mode_sum_value: complex
    max_abs_deviation: float
    n_modes: int

    def to_dict(self) -> dict:
        """Convert to dictionary representation."""
        return {
            "direct_value": self.direct_value,
            "mode_sum_value": self.mode_sum_value,
            "max_abs_deviation": self.max_abs_deviation,
            "n_modes": self.n_modes,
        }


def factorize(op_x: Operator, op_y: Operator) -> FactorizationReport:
    """
    Compare the vacuum row of op_x·op_y with the explicit one-photon mode sum.

    Raises:
        DimensionMismatchError: If the operators were built on different
            mode bases.
    """
    if op_x.basis_label != op_y.basis_label or op_x.dim != op_y.dim:
        raise DimensionMismatchError(
            "Field operators were built on different mode bases",
            {"x_basis": op_x.basis_label, "y_basis": op_y.basis_label},
        )

    direct = complex((op_x @ op_y).entries[0, 0])
    mode_sum = complex(np.sum(op_x.entries[0, 1:] * op_y.entries[1:, 0]))
    return FactorizationReport(
        direct_value=direct,
        mode_sum_value=mode_sum,
        max_abs_deviation=abs(direct - mode_sum),
        n_modes=op_x.dim - 1,
    )


def factorization_check(
    modes: ModeBasis,
    x: SpacetimePoint,
    y: SpacetimePoint,
    volume: float,
    component: int = 0,
) -> FactorizationReport:
    """Build A(x) and A(y) on the shared one-photon sector and factorize."""
    if not modes:
        raise SimulationError("Factorization check needs at least one mode")
    op_x = field_operator(modes, x, volume, component)
    op_y = field_operator(modes, y, volume, component)
    report = factorize(op_x, op_y)
    logger.debug(
        f"Factorization over {report.n_modes} modes: deviation {report.max_abs_deviation:.3e}"
    )
    return report
