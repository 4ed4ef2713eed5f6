"""
Hilbert-space core for the transaction simulator.

This module provides the finite-dimensional complex linear algebra the rest of
the library is built on: state vectors (offer waves), dual vectors
(confirmation waves), dense operators, density operators, the two truncated
Fock constructions (a single mode up to n_max photons, and the one-photon
sector over a list of field modes), ladder operators, the mode expansion of
the field operator, coherent states and mixture diagnostics.

Natural units (hbar = c = 1) are used throughout.
"""

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special, stats
from typing_extensions import Self

from utils import (
    STRUCTURAL_TOL,
    DimensionMismatchError,
    NormalizationError,
    SimulationError,
    TruncationError,
    as_vector3,
    logger,
)


MODE_BASIS = "mode"
FOCK_BASIS = "fock"


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class StateVector:
    """
    A ket: ordered complex amplitudes over a named basis.

    Attributes:
        amplitudes: Complex amplitudes (read-only array).
        basis_label: Identifier of the basis (mode basis, Fock number basis).
    """
    amplitudes: np.ndarray
    basis_label: str = MODE_BASIS

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size < 1:
            raise SimulationError("State vectors need at least one amplitude")
        if not np.all(np.isfinite(amplitudes)):
            raise SimulationError("State vector amplitudes must be finite")
        object.__setattr__(self, "amplitudes", _frozen(amplitudes))

    @classmethod
    def basis(cls, index: int, dim: int, basis_label: str = MODE_BASIS) -> Self:
        """Return the basis ket |index> of a dim-dimensional space."""
        if not 0 <= index < dim:
            raise SimulationError(
                f"Basis index {index} outside a space of dimension {dim}",
                {"index": index, "dim": dim},
            )
        amplitudes = np.zeros(dim, dtype=complex)
        amplitudes[index] = 1.0
        return cls(amplitudes, basis_label)

    @property
    def dim(self) -> int:
        return int(self.amplitudes.size)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = STRUCTURAL_TOL) -> bool:
        """True when the squared norm equals 1 within tol."""
        return abs(float(np.vdot(self.amplitudes, self.amplitudes).real) - 1.0) <= tol

    def normalize(self) -> "StateVector":
        """
        Return the unit-norm copy of this state.

        Raises:
            NormalizationError: If the vector is zero.
        """
        norm = self.norm
        if norm == 0.0:
            raise NormalizationError("Cannot normalize the zero vector", {"dim": self.dim})
        return StateVector(self.amplitudes / norm, self.basis_label)

    def dual(self) -> "DualVector":
        """The bra <psi| (componentwise conjugate)."""
        return DualVector(np.conj(self.amplitudes))

    def to_dict(self) -> dict:
        """Convert to dictionary representation."""
        return {
            "basis_label": self.basis_label,
            "amplitudes": [[a.real, a.imag] for a in self.amplitudes.tolist()],
        }


@dataclass(frozen=True, eq=False)
class DualVector:
    """A bra; amplitudes are stored already conjugated."""
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size < 1:
            raise SimulationError("Dual vectors need at least one amplitude")
        object.__setattr__(self, "amplitudes", _frozen(amplitudes))

    @property
    def dim(self) -> int:
        return int(self.amplitudes.size)

    def dual(self) -> StateVector:
        """The ket this bra is dual to."""
        return StateVector(np.conj(self.amplitudes))


@dataclass(frozen=True, eq=False)
class Operator:
    """
    Dense square complex matrix acting on a labelled space.

    Attributes:
        entries: The matrix (read-only array).
        basis_label: Identifier of the space the operator acts on.
    """
    entries: np.ndarray
    basis_label: str = MODE_BASIS

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] < 1:
            raise DimensionMismatchError(
                "Operators must be non-empty square matrices",
                {"shape": list(entries.shape)},
            )
        object.__setattr__(self, "entries", _frozen(entries))

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def dagger(self) -> "Operator":
        """Conjugate transpose."""
        return Operator(self.entries.conj().T, self.basis_label)

    def is_hermitian(self, tol: float = STRUCTURAL_TOL) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.conj().T)) <= tol)

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def apply(self, ket: StateVector) -> StateVector:
        """Return O|ket> (not renormalized)."""
        _check_dims(self.dim, ket.dim)
        return StateVector(self.entries @ ket.amplitudes, ket.basis_label)

    def expectation(self, ket: StateVector) -> complex:
        """Return <ket|O|ket>."""
        _check_dims(self.dim, ket.dim)
        return complex(np.vdot(ket.amplitudes, self.entries @ ket.amplitudes))

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return self.apply(other)
        if isinstance(other, Operator):
            _check_dims(self.dim, other.dim)
            return Operator(self.entries @ other.entries, self.basis_label)
        return NotImplemented


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """
    Hermitian, unit-trace, positive semidefinite matrix.

    Construction fails with SimulationError when any of the three properties
    is violated beyond 1e-12.
    """
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] < 1:
            raise DimensionMismatchError(
                "Density operators must be non-empty square matrices",
                {"shape": list(entries.shape)},
            )

        asymmetry = float(np.max(np.abs(entries - entries.conj().T)))
        if asymmetry > STRUCTURAL_TOL:
            raise SimulationError("Density operator is not Hermitian", {"deviation": asymmetry})

        trace = complex(np.trace(entries))
        if abs(trace - 1.0) > STRUCTURAL_TOL:
            raise SimulationError("Density operator must have unit trace", {"trace": trace})

        smallest = float(np.min(np.linalg.eigvalsh(entries)))
        if smallest < -STRUCTURAL_TOL:
            raise SimulationError(
                "Density operator has a negative eigenvalue", {"eigenvalue": smallest}
            )

        object.__setattr__(self, "entries", _frozen(entries))

    @classmethod
    def from_pure(cls, ket: StateVector) -> Self:
        """|psi><psi| for a normalized ket."""
        return cls(projector(ket).entries)

    @classmethod
    def from_mixture(cls, weights: Sequence[float], kets: Sequence[StateVector]) -> Self:
        """Convex sum of projectors sum_i w_i |k_i><k_i|."""
        if len(weights) != len(kets) or not kets:
            raise SimulationError(
                "Mixtures need one weight per ket",
                {"weights": len(weights), "kets": len(kets)},
            )
        entries = np.zeros((kets[0].dim, kets[0].dim), dtype=complex)
        for weight, ket in zip(weights, kets):
            entries = entries + float(weight) * projector(ket).entries
        return cls(entries)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


@dataclass(frozen=True, eq=False)
class FieldMode:
    """
    One transverse plane-wave mode of the radiation field.

    Attributes:
        k_vec: Wave vector (1/length, natural units).
        polarization: Polarization index, 1 or 2.
        omega: Angular frequency |k_vec| (derived).
        polarization_vector: Real unit vector orthogonal to k_vec (derived).
    """
    k_vec: np.ndarray
    polarization: int = 1
    omega: float = field(init=False)
    polarization_vector: np.ndarray = field(init=False)

    def __post_init__(self):
        k_vec = as_vector3(self.k_vec, "k_vec")
        omega = float(np.linalg.norm(k_vec))
        if omega == 0.0:
            raise SimulationError("Field modes need a nonzero wave vector")
        if self.polarization not in (1, 2):
            raise SimulationError(
                "Polarization index must be 1 or 2", {"polarization": self.polarization}
            )

        first, second = _transverse_basis(k_vec / omega)
        chosen = first if self.polarization == 1 else second

        object.__setattr__(self, "k_vec", k_vec)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "polarization_vector", _frozen(chosen))

    @property
    def signature(self) -> Tuple[float, float, float, int]:
        """Hashable identity of the mode (wave vector and polarization)."""
        return (*(float(v) for v in self.k_vec), self.polarization)

    def to_dict(self) -> dict:
        """Convert to dictionary representation."""
        return {
            "k_vec": [float(v) for v in self.k_vec],
            "polarization": self.polarization,
            "omega": self.omega,
        }


def _transverse_basis(k_hat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Two orthonormal real vectors spanning the plane orthogonal to k_hat."""
    # z is the reference axis unless k is (nearly) along it
    reference = np.array([0.0, 0.0, 1.0]) if abs(k_hat[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    first = reference - np.dot(reference, k_hat) * k_hat
    first = first / np.linalg.norm(first)
    second = np.cross(k_hat, first)
    return first, second / np.linalg.norm(second)


ModeBasis = Sequence[FieldMode]


@dataclass(frozen=True, eq=False)
class SpacetimePoint:
    """A point (x, t) in natural units."""
    x: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", as_vector3(self.x, "x"))
        object.__setattr__(self, "t", float(self.t))

    def phase(self, mode: FieldMode) -> float:
        """k·x − ω t for the given mode."""
        return float(np.dot(mode.k_vec, self.x) - mode.omega * self.t)


@dataclass(frozen=True, eq=False)
class FockSpace:
    """
    Truncated Fock space, in one of two constructions.

    Single mode: number states |0>..|n_max>, dimension n_max + 1.
    One-photon sector: {|0>, |k_1>, ..., |k_M>} over a list of modes,
    dimension 1 + M (sector_cutoff fixed at 1).
    """
    n_max: Optional[int] = None
    modes: Tuple[FieldMode, ...] = ()
    sector_cutoff: int = 1

    def __post_init__(self):
        modes = tuple(self.modes)
        object.__setattr__(self, "modes", modes)

        if (self.n_max is None) == (not modes):
            raise SimulationError(
                "A Fock space is either single-mode (n_max) or a one-photon sector (modes)"
            )
        if self.n_max is not None and (int(self.n_max) != self.n_max or self.n_max < 0):
            raise SimulationError("n_max must be a non-negative integer", {"n_max": self.n_max})
        if modes and self.sector_cutoff != 1:
            raise SimulationError(
                "Only the one-photon sector is supported", {"sector_cutoff": self.sector_cutoff}
            )
        if modes and len({mode.signature for mode in modes}) != len(modes):
            raise SimulationError("Mode list contains duplicate modes")

    @classmethod
    def single_mode(cls, n_max: int) -> Self:
        return cls(n_max=n_max)

    @classmethod
    def one_photon_sector(cls, modes: ModeBasis) -> Self:
        if not modes:
            raise SimulationError("The one-photon sector needs at least one mode")
        return cls(modes=tuple(modes))

    @property
    def is_single_mode(self) -> bool:
        return self.n_max is not None

    @property
    def dim(self) -> int:
        if self.is_single_mode:
            return int(self.n_max) + 1
        return 1 + len(self.modes)

    @property
    def basis_label(self) -> str:
        if self.is_single_mode:
            return FOCK_BASIS
        digest = hashlib.sha1(repr([m.signature for m in self.modes]).encode("utf-8"))
        return f"one-photon:{len(self.modes)}:{digest.hexdigest()[:12]}"


def _check_dims(left: int, right: int) -> None:
    if left != right:
        raise DimensionMismatchError(
            f"Dimension mismatch: {left} vs {right}", {"left": left, "right": right}
        )


def _require_single_mode(space: FockSpace) -> None:
    if not space.is_single_mode:
        raise SimulationError("Operation requires the single-mode Fock construction")


def inner_product(bra: DualVector, ket: StateVector) -> complex:
    """
    Pair a bra with a ket.

    The bra amplitudes are already conjugated, so no further conjugation
    happens here.

    Raises:
        DimensionMismatchError: If the dimensions differ.
    """
    _check_dims(bra.dim, ket.dim)
    return complex(np.dot(bra.amplitudes, ket.amplitudes))


def projector(ket: StateVector) -> Operator:
    """
    Return |k><k| for a normalized ket.

    Raises:
        NormalizationError: If the ket is not normalized within 1e-12.
    """
    if not ket.is_normalized():
        raise NormalizationError(
            "Projectors are built from normalized kets", {"norm": ket.norm}
        )
    return Operator(np.outer(ket.amplitudes, ket.amplitudes.conj()), ket.basis_label)


def commutator(a: Operator, b: Operator) -> Operator:
    """[a, b] = ab − ba."""
    _check_dims(a.dim, b.dim)
    return Operator(a.entries @ b.entries - b.entries @ a.entries, a.basis_label)


def ladder_operators(space: FockSpace) -> Tuple[Operator, Operator]:
    """
    Annihilation and creation operators on a truncated single mode.

    a|n> = sqrt(n)|n-1>, a†|n> = sqrt(n+1)|n+1>, with a†|n_max> = 0.

    Returns:
        Tuple (a, a_dagger).

    Raises:
        SimulationError: For the multimode construction or n_max = 0.
    """
    _require_single_mode(space)
    if space.n_max < 1:
        raise SimulationError("Ladder operators need n_max >= 1", {"n_max": space.n_max})

    lowering = np.diag(np.sqrt(np.arange(1, space.n_max + 1, dtype=float)), k=1).astype(complex)
    annihilation = Operator(lowering, FOCK_BASIS)
    return annihilation, annihilation.dagger()


def number_operator(space: FockSpace) -> Operator:
    """n = a†a on the single-mode space."""
    _require_single_mode(space)
    return Operator(np.diag(np.arange(space.dim, dtype=float)), FOCK_BASIS)


def fock_state(n: int, space: FockSpace) -> StateVector:
    """The number state |n> of a single truncated mode."""
    _require_single_mode(space)
    return StateVector.basis(n, space.dim, FOCK_BASIS)


def field_operator(
    modes: ModeBasis,
    x: SpacetimePoint,
    volume: float,
    component: int = 0,
) -> Operator:
    """
    Mode expansion of one Cartesian component of the vector potential.

    Restricted to the one-photon sector {|0>, |k_1>, ..., |k_M>}:
    A(x) = sum_k sqrt(1/(2 ω_k V)) [a_k ε_k e^{i(k·x − ω t)} + h.c.].

    Args:
        modes: Modes spanning the sector (order defines the basis).
        x: Spacetime point.
        volume: Quantization volume V > 0.
        component: Cartesian component of the polarization vector (0, 1, 2).

    Returns:
        Hermitian operator of dimension 1 + M.
    """
    if not modes:
        raise SimulationError("The field operator needs at least one mode")
    if not volume > 0:
        raise SimulationError("Quantization volume must be positive", {"volume": volume})
    if component not in (0, 1, 2):
        raise SimulationError("Component must be 0, 1 or 2", {"component": component})

    space = FockSpace.one_photon_sector(modes)
    entries = np.zeros((space.dim, space.dim), dtype=complex)

    for index, mode in enumerate(space.modes, start=1):
        amplitude = (
            math.sqrt(1.0 / (2.0 * mode.omega * volume))
            * mode.polarization_vector[component]
            * np.exp(1j * x.phase(mode))
        )
        entries[0, index] = amplitude  # a_k|k> = |0>
        entries[index, 0] = np.conj(amplitude)  # a_k†|0> = |k>

    return Operator(entries, space.basis_label)


def poisson_tail_mass(mean: float, n_max: int) -> float:
    """Poisson(mean) probability of more than n_max photons."""
    if mean == 0:
        return 0.0
    return float(stats.poisson.sf(n_max, mean))


def coherent_state(alpha: complex, space: FockSpace) -> StateVector:
    """
    Truncated coherent state |alpha> on a single mode.

    Amplitudes c_n = e^{-|α|²/2} α^n / sqrt(n!), renormalized on the retained
    levels.

    Raises:
        TruncationError: If |α|² > n_max / 4; the context carries the Poisson
            tail mass lost to truncation.
    """
    _require_single_mode(space)
    alpha = complex(alpha)
    mean = abs(alpha) ** 2
    tail = poisson_tail_mass(mean, space.n_max)

    if mean > space.n_max / 4:
        raise TruncationError(
            f"|alpha|^2 = {mean:g} is too large for n_max = {space.n_max}",
            {"tail_mass": tail, "mean_photon_number": mean, "n_max": space.n_max},
        )

    if alpha == 0:
        return fock_state(0, space)

    levels = np.arange(space.dim)
    log_magnitude = -mean / 2 + levels * math.log(abs(alpha)) - 0.5 * special.gammaln(levels + 1)
    amplitudes = np.exp(log_magnitude) * np.exp(1j * levels * np.angle(alpha))

    logger.debug(f"Coherent state alpha={alpha} on n_max={space.n_max}, tail mass {tail:.3e}")
    return StateVector(amplitudes, FOCK_BASIS).normalize()


def photon_number_distribution(ket: StateVector) -> np.ndarray:
    """P(n) = |<n|psi>|² over the retained number states."""
    if not ket.is_normalized():
        raise NormalizationError("Number statistics need a normalized state", {"norm": ket.norm})
    return np.abs(ket.amplitudes) ** 2


def photon_number_stats(ket: StateVector) -> Tuple[float, float]:
    """
    Mean and variance of the photon number of a single-mode state.

    Returns:
        Tuple (mean, variance).
    """
    probabilities = photon_number_distribution(ket)
    levels = np.arange(ket.dim, dtype=float)
    mean = float(np.dot(levels, probabilities))
    variance = float(np.dot((levels - mean) ** 2, probabilities))
    return mean, variance


def mean_field_amplitude(ket: StateVector, space: FockSpace) -> complex:
    """<psi|a|psi>: equals alpha for a coherent state and 0 for a number state."""
    annihilation, _ = ladder_operators(space)
    return annihilation.expectation(ket)


def purity(rho: DensityOperator) -> float:
    """Tr(rho²); 1 for pure states, 1/N for an equal mixture of N projectors."""
    return float(np.sum(np.abs(rho.entries) ** 2))


def mixture_entropy(rho: DensityOperator) -> float:
    """Von Neumann entropy −sum λ ln λ, with 0·ln 0 = 0."""
    eigenvalues = np.clip(rho.eigenvalues, 0.0, None)
    return float(np.sum(special.entr(eigenvalues)))
