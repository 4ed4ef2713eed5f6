"""
First-order time-dependent perturbation theory for emission and absorption.

This module provides the time kernels of a two-level emitter coupled to one
field mode, the interaction matrix elements, the joint emission/absorption
amplitude (which reduces to the Born-rule square of a single amplitude), and
the golden-rule limit in which the squared kernel integrates to 2πt.

Natural units (hbar = c = 1) are used throughout.
"""

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import integrate, special
from typing_extensions import Self

from hilbert import FieldMode
from utils import (
    FINE_STRUCTURE,
    NoPhotonError,
    QuadratureError,
    SimulationError,
    as_vector3,
    logger,
)


# Golden-rule quadrature: central region |δt| <= GOLDEN_RULE_CUTOFF, analytic tail beyond
GOLDEN_RULE_CUTOFF = 200.0
GOLDEN_RULE_EPSREL = 1e-12
GOLDEN_RULE_ACCEPT = 1e-8

# Decay rates are only meaningful once many gap periods have elapsed
MIN_GAP_PERIODS = 10.0


class Process(Enum):
    EMISSION = "emission"
    ABSORPTION = "absorption"


@dataclass(frozen=True)
class TwoLevelAtom:
    """
    Emitter or absorber with two levels.

    Attributes:
        omega_lower: Frequency of the lower level.
        omega_upper: Frequency of the upper level.
        delta_omega: Gap omega_upper − omega_lower (derived).
    """
    omega_lower: float
    omega_upper: float
    delta_omega: float = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.omega_lower) and math.isfinite(self.omega_upper)):
            raise SimulationError("Level frequencies must be finite")
        if self.omega_upper <= self.omega_lower:
            raise SimulationError(
                "Upper level must lie above the lower level",
                {"omega_lower": self.omega_lower, "omega_upper": self.omega_upper},
            )
        object.__setattr__(self, "delta_omega", self.omega_upper - self.omega_lower)


@dataclass(frozen=True, eq=False)
class CouplingContext:
    """
    Parameters of the minimal-coupling interaction −(e/m) A·p.

    Attributes:
        e: Electromagnetic coupling, e² = 4π·fine_structure.
        m: Electron mass.
        volume: Quantization volume.
        p_ba: Momentum matrix element <B|ε·p|A>.
        position: Location of the atom (origin by default).
    """
    e: float
    m: float
    volume: float
    p_ba: complex
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not math.isfinite(self.e):
            raise SimulationError("Coupling e must be finite", {"e": self.e})
        if not self.m > 0:
            raise SimulationError("Mass must be positive", {"m": self.m})
        if not self.volume > 0:
            raise SimulationError("Quantization volume must be positive", {"volume": self.volume})
        p_ba = complex(self.p_ba)
        if not (math.isfinite(p_ba.real) and math.isfinite(p_ba.imag)):
            raise SimulationError("p_ba must be finite", {"p_ba": p_ba})
        object.__setattr__(self, "p_ba", p_ba)
        object.__setattr__(self, "position", as_vector3(self.position, "position"))

    @classmethod
    def from_fine_structure(
        cls,
        m: float,
        volume: float,
        p_ba: complex,
        fine_structure: float = FINE_STRUCTURE,
    ) -> Self:
        """Build a context with e = sqrt(4π·fine_structure)."""
        if not fine_structure > 0:
            raise SimulationError(
                "fine_structure must be positive", {"fine_structure": fine_structure}
            )
        return cls(e=math.sqrt(4 * math.pi * fine_structure), m=m, volume=volume, p_ba=p_ba)

    @property
    def fine_structure(self) -> float:
        return self.e**2 / (4 * math.pi)

    def to_dict(self) -> dict:
        """Convert to dictionary representation."""
        return {
            "e": self.e,
            "m": self.m,
            "volume": self.volume,
            "p_ba": self.p_ba,
            "position": [float(v) for v in self.position],
        }


def _check_time(t: float) -> float:
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise SimulationError("Elapsed time must be finite and non-negative", {"t": t})
    return t


def _oscillating_integral(frequency: float, t: float) -> complex:
    """
    ∫_0^t e^{i·frequency·τ} dτ in half-angle form t·e^{iθ/2}·sinc(θ/2), θ = frequency·t.

    Equal to (e^{iθ} − 1)/(i·frequency) but free of cancellation near
    resonance; the zero-frequency limit is exactly t.
    """
    theta = frequency * t
    return t * np.exp(0.5j * theta) * np.sinc(theta / (2.0 * math.pi))


def emission_kernel(delta_omega: float, omega_k: float, t: float) -> complex:
    """Time kernel of emission, ∫_0^t e^{−iΔωτ} e^{iω_kτ} dτ."""
    return complex(_oscillating_integral(omega_k - delta_omega, _check_time(t)))


def absorption_kernel(delta_omega: float, omega_k: float, t: float) -> complex:
    """Time kernel of absorption, the complex conjugate of the emission kernel."""
    return complex(_oscillating_integral(delta_omega - omega_k, _check_time(t)))


def kernel_intensity(detuning: float, t: float) -> float:
    """|kernel|² = 4 sin²(δt/2)/δ², with the δ → 0 limit t²."""
    t = _check_time(t)
    return float(t * t * np.sinc(detuning * t / (2.0 * math.pi)) ** 2)


@dataclass(frozen=True)
class TimeKernelValue:
    """
    A kernel value together with its arguments.

    Construction checks |value|² against 4 sin²(δt/2)/δ².

    Attributes:
        value: Kernel value.
        omega_k: Mode frequency.
        t: Elapsed time.
        detuning: δ = Δω − ω_k.
    """
    value: complex
    omega_k: float
    t: float
    detuning: float

    def __post_init__(self):
        expected = kernel_intensity(self.detuning, self.t)
        actual = abs(self.value) ** 2
        if abs(actual - expected) > 1e-9 * expected + 1e-12 * max(1.0, self.t**2):
            raise SimulationError(
                "Kernel value is inconsistent with its detuning",
                {"squared_modulus": actual, "expected": expected},
            )


def evaluate_kernel(
    delta_omega: float,
    omega_k: float,
    t: float,
    process: Process = Process.EMISSION,
) -> TimeKernelValue:
    """Evaluate the emission or absorption kernel and wrap it with its arguments."""
    process = Process(process)
    kernel = emission_kernel if process == Process.EMISSION else absorption_kernel
    return TimeKernelValue(
        value=kernel(delta_omega, omega_k, t),
        omega_k=omega_k,
        t=float(t),
        detuning=delta_omega - omega_k,
    )


def emission_matrix_element(
    ctx: CouplingContext,
    mode: FieldMode,
    n_photons: int,
    process: Process = Process.EMISSION,
) -> complex:
    """
    First-order matrix element of −(e/m) A·p between atom-field states.

    Emission into a mode holding n photons carries √(n+1), p_ba and the
    phase e^{−ik·x}; absorption from a mode holding n photons carries √n,
    conj(p_ba) and e^{+ik·x}.

    Args:
        ctx: Coupling parameters.
        mode: Field mode.
        n_photons: Occupation of the mode before the process.
        process: Emission or absorption.

    Returns:
        The complex matrix element.

    Raises:
        NoPhotonError: If absorption is requested from an empty mode.
    """
    process = Process(process)
    if int(n_photons) != n_photons or n_photons < 0:
        raise SimulationError("n_photons must be a non-negative integer", {"n_photons": n_photons})

    prefactor = -(ctx.e / ctx.m) * math.sqrt(1.0 / (2.0 * mode.omega * ctx.volume))
    phase = float(np.dot(mode.k_vec, ctx.position))

    if process == Process.EMISSION:
        return complex(prefactor * ctx.p_ba * math.sqrt(n_photons + 1) * np.exp(-1j * phase))

    if n_photons == 0:
        raise NoPhotonError(
            "Cannot absorb from a mode holding no photon", {"k_vec": mode.k_vec.tolist()}
        )
    return complex(prefactor * ctx.p_ba.conjugate() * math.sqrt(n_photons) * np.exp(1j * phase))


def absorption_matrix_element(ctx: CouplingContext, mode: FieldMode, n_photons: int) -> complex:
    return emission_matrix_element(ctx, mode, n_photons, Process.ABSORPTION)


def joint_amplitude(m_emit: complex, delta_omega: float, omega_k: float, t: float) -> float:
    """
    Combined emission/absorption amplitude M·conj(M)·|absorption kernel|².

    Equal to |M·emission_kernel|², the Born-rule probability of either
    process alone; always real and non-negative.
    """
    modulus = (m_emit * np.conj(m_emit)).real
    return float(modulus * abs(absorption_kernel(delta_omega, omega_k, t)) ** 2)


def joint_amplitude_pair(
    m_emit: complex,
    m_absorb: complex,
    delta_omega: float,
    omega_k: float,
    t: float,
) -> complex:
    """
    Joint amplitude for separately supplied emitter and absorber elements.

    The reduction to a modulus squared only holds when the two elements are
    complex conjugates; otherwise the complex product is still returned and a
    warning is logged.
    """
    scale = max(abs(m_emit), abs(m_absorb), 1.0)
    if abs(m_absorb - np.conj(m_emit)) > 1e-12 * scale:
        logger.warning(
            f"Emitter and absorber matrix elements are not conjugate ({m_emit} vs {m_absorb}); "
            "joint amplitude is not a probability"
        )
    return complex(m_emit * m_absorb * abs(absorption_kernel(delta_omega, omega_k, t)) ** 2)


@dataclass(frozen=True)
class GoldenRuleReport:
    """Result of integrating the squared kernel over detuning."""
    t: float
    integral: float
    expected: float
    relative_error: float
    tail: float
    residual: float

    def to_dict(self) -> dict:
        """Convert to dictionary representation."""
        return {
            "t": self.t,
            "integral": self.integral,
            "expected": self.expected,
            "rel_err": self.relative_error,
            "tail": self.tail,
            "residual": self.residual,
        }


def _sinc_squared(u: float) -> float:
    return float(np.sinc(u / (2.0 * math.pi)) ** 2)


def golden_rule_report(t: float) -> GoldenRuleReport:
    """
    Integrate 4 sin²(δt/2)/δ² over all detunings.

    With u = δt the integral is t·∫ 4 sin²(u/2)/u² du. The central region
    |u| <= 200 is integrated one period at a time; the tail beyond is
    evaluated in closed form with the sine integral.

    Raises:
        QuadratureError: If the central quadrature does not converge.
    """
    t = _check_time(t)
    if t == 0:
        raise SimulationError("Golden-rule check needs t > 0", {"t": t})

    period = 2.0 * math.pi
    edges = list(np.arange(0.0, GOLDEN_RULE_CUTOFF, period)) + [GOLDEN_RULE_CUTOFF]

    central = 0.0
    residual = 0.0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        for left, right in zip(edges[:-1], edges[1:]):
            value, error = integrate.quad(_sinc_squared, left, right, epsrel=GOLDEN_RULE_EPSREL)
            central += value
            residual += error
    for warning in caught:
        logger.debug(f"Quadrature warning: {warning.message}")

    if not math.isfinite(residual) or residual > GOLDEN_RULE_ACCEPT * max(1.0, abs(central)):
        raise QuadratureError(
            "Golden-rule quadrature did not converge", {"residual": residual, "t": t}
        )

    # ∫_U^∞ (2 − 2cos u)/u² du = 2/U − 2(cos U/U − (π/2 − Si(U)))
    cutoff = GOLDEN_RULE_CUTOFF
    sine_integral, _ = special.sici(cutoff)
    tail = 2.0 / cutoff - 2.0 * (math.cos(cutoff) / cutoff - (math.pi / 2 - sine_integral))

    integral = 2.0 * t * (central + tail)
    expected = 2.0 * math.pi * t
    return GoldenRuleReport(
        t=t,
        integral=integral,
        expected=expected,
        relative_error=abs(integral - expected) / expected,
        tail=2.0 * t * tail,
        residual=2.0 * t * residual,
    )


def golden_rule_check(t: float) -> float:
    """∫ |kernel(δ, t)|² dδ over the real line; approaches 2πt."""
    return golden_rule_report(t).integral


def transition_probability(m_emit: complex, t: float) -> float:
    """Detuning-integrated transition probability |M|²·∫|kernel|² dδ."""
    return abs(m_emit) ** 2 * golden_rule_check(t)


def decay_rate_per_mode(
    ctx: CouplingContext,
    mode: FieldMode,
    t_large: float,
    atom: Optional[TwoLevelAtom] = None,
) -> float:
    """
    Large-t slope of the detuning-integrated transition probability.

    Equal to 2π|M|² once the golden-rule limit is reached.

    Args:
        ctx: Coupling parameters.
        mode: Field mode the photon is emitted into (vacuum initially).
        t_large: Elapsed time.
        atom: Optional emitter, used to check that t_large spans many periods.

    Returns:
        Rate P(t)/t.
    """
    if atom is not None and t_large * atom.delta_omega < MIN_GAP_PERIODS:
        logger.warning(
            f"t·Δω = {t_large * atom.delta_omega:.3g} is small; the golden-rule limit may not apply"
        )
    m_emit = emission_matrix_element(ctx, mode, 0)
    return transition_probability(m_emit, t_large) / t_large
