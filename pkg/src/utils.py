"""
Utility functions for the transaction simulator.

This module provides the pieces shared across the library: logging
configuration, environment-driven settings, physical constants, the error
hierarchy used by every module, and small numeric/serialization helpers.
"""

import logging
import math
import os
import re
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np


# Configure logging based on environment variable
DEBUG_MODE = os.environ.get("TRANSACTION_SIM_DEBUG", "false").lower() == "true"

logging.basicConfig(
    level=logging.DEBUG if DEBUG_MODE else logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)

logger = logging.getLogger("transaction_sim")

LIBRARY_VERSION = "1.0.0"

# Runtime settings
DEFAULT_WORKERS = int(os.environ.get("TRANSACTION_SIM_WORKERS", 1))
DEFAULT_CHUNK_SIZE = int(os.environ.get("TRANSACTION_SIM_CHUNK_SIZE", 4096))
DEFAULT_CACHE_DIR = os.environ.get("TRANSACTION_SIM_CACHE_DIR") or None

# CODATA fine-structure constant, default absorber response probability
FINE_STRUCTURE = 0.0072973525693

# Tolerances
STRUCTURAL_TOL = 1e-12
RENORMALIZE_WARN_TOL = 1e-9
RENORMALIZE_FAIL_TOL = 1e-3

MAX_SEED = 2**64 - 1


class ErrorCode(Enum):
    """Machine-readable error codes carried by every library error."""
    INVALID_ARGUMENT = "invalid_argument"
    DIMENSION_MISMATCH = "dimension_mismatch"
    NOT_NORMALIZED = "not_normalized"
    TRUNCATION = "truncation_inadequate"
    QUADRATURE = "quadrature_not_converged"
    NO_PHOTON = "no_photon"
    SCENARIO_PARSE = "scenario_parse_error"
    SCENARIO_SCHEMA = "scenario_schema_error"
    INTERNAL = "internal_error"
    USAGE = "usage_error"


class SimulationError(ValueError):
    """
    Base class for all errors raised by the simulator.

    Attributes:
        code: Stable machine-readable error code.
        message: Human-readable description.
        context: Extra structured details (offending values, estimates).
    """

    code = ErrorCode.INVALID_ARGUMENT

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = dict(context or {})

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the error object emitted by the CLI."""
        return {
            "code": self.code.value,
            "message": self.message,
            "context": to_jsonable(self.context),
        }


class DimensionMismatchError(SimulationError):
    """Operands live in spaces of different dimension."""
    code = ErrorCode.DIMENSION_MISMATCH


class NormalizationError(SimulationError):
    """A state that must be normalized is not (or cannot be)."""
    code = ErrorCode.NOT_NORMALIZED


class TruncationError(SimulationError):
    """A truncated Fock space is too small for the requested state."""
    code = ErrorCode.TRUNCATION


class QuadratureError(SimulationError):
    """Adaptive quadrature did not reach the requested accuracy."""
    code = ErrorCode.QUADRATURE


class NoPhotonError(SimulationError):
    """Absorption requested from a mode holding no photon."""
    code = ErrorCode.NO_PHOTON


class InternalError(SimulationError):
    """Unexpected failure, wrapped so the CLI still emits an error object."""
    code = ErrorCode.INTERNAL


class UsageError(SimulationError):
    """Malformed command line."""
    code = ErrorCode.USAGE


class ScenarioError(SimulationError):
    """A scenario document is malformed or violates the schema."""

    def __init__(
        self,
        message: str,
        context: Optional[Dict[str, Any]] = None,
        code: ErrorCode = ErrorCode.SCENARIO_SCHEMA,
    ):
        super().__init__(message, context)
        self.code = code


def sanitize_identifier(identifier: Any) -> str:
    """
    Sanitize an absorber identifier.

    Args:
        identifier: Raw identifier from a scenario document or caller.

    Returns:
        Identifier stripped of surrounding whitespace and of any character
        outside letters, digits, '-', '_', '.' and ':'.

    Raises:
        SimulationError: If nothing usable is left.
    """
    if identifier is None:
        raise SimulationError("Absorber identifier cannot be empty")

    sanitized = re.sub(r"[^\w\-.:]", "", str(identifier).strip())

    if not sanitized:
        raise SimulationError(
            "Absorber identifier must contain at least one valid character",
            {"identifier": str(identifier)},
        )

    return sanitized


def validate_probability(value: float, name: str = "p") -> float:
    """
    Check that a value is a probability.

    Args:
        value: Candidate probability.
        name: Parameter name used in the error message.

    Returns:
        The value as a float.

    Raises:
        SimulationError: If the value is not finite or lies outside [0, 1].
    """
    value = float(value)
    if not math.isfinite(value) or value < 0.0 or value > 1.0:
        raise SimulationError(
            f"{name} must lie in [0, 1], got {value}", {name: value}
        )
    return value


def as_vector3(values: Sequence[float], name: str = "vector") -> np.ndarray:
    """Convert a 3-sequence of reals to a read-only float array."""
    try:
        array = np.array(values, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise SimulationError(f"{name} must be three real numbers: {exc}") from exc
    if array.shape != (3,) or not np.all(np.isfinite(array)):
        raise SimulationError(
            f"{name} must be three finite real numbers", {name: str(list(array))}
        )
    array.setflags(write=False)
    return array


def complex_to_pair(value: complex) -> List[float]:
    """Represent a complex number as [re, im] for JSON emission."""
    value = complex(value)
    return [value.real, value.imag]


def pair_to_complex(pair: Sequence[float]) -> complex:
    """Inverse of complex_to_pair."""
    if len(pair) != 2:
        raise SimulationError("Complex values are written as [re, im]", {"value": list(pair)})
    return complex(float(pair[0]), float(pair[1]))


def to_jsonable(value: Any) -> Any:
    """
    Recursively convert numpy and complex values into JSON-native types.

    Args:
        value: Arbitrary nested structure of dicts, lists, tuples, numpy
            scalars/arrays, Enums and complex numbers.

    Returns:
        Structure made of dict, list, str, int, float, bool and None only.
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return complex_to_pair(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def format_number(value: Any) -> str:
    """
    Format a number for tabular output.

    Floats use 17 significant digits so doubles survive the round trip.

    Args:
        value: Number (or anything else, which is passed through str()).

    Returns:
        String representation.
    """
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def flatten_complex_columns(row: Dict[str, Any]) -> Dict[str, Any]:
    """Split complex entries of a table row into `<name>_re` / `<name>_im`."""
    flat: Dict[str, Any] = {}
    for key, value in row.items():
        if isinstance(value, (complex, np.complexfloating)):
            flat[f"{key}_re"] = float(value.real)
            flat[f"{key}_im"] = float(value.imag)
        else:
            flat[key] = value
    return flat


def fit_convergence_order(steps: Iterable[float], errors: Iterable[float]) -> float:
    """
    Fit the empirical order p in error ≈ C·step^p by least squares in log-log.

    Args:
        steps: Regulator or step values (positive).
        errors: Matching absolute errors (positive).

    Returns:
        The fitted slope p.
    """
    steps = np.asarray(list(steps), dtype=float)
    errors = np.asarray(list(errors), dtype=float)
    if steps.size < 2 or steps.size != errors.size:
        raise SimulationError("Need at least two (step, error) pairs to fit an order")
    if np.any(steps <= 0) or np.any(errors <= 0):
        raise SimulationError("Steps and errors must be positive to fit an order")
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)
    return float(slope)
