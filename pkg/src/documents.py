"""
Scenario documents and result documents.

This module handles the JSON side of the command-line tool:
- ScenarioDocument schema (pydantic) and parsing of raw bytes into a
  validated Scenario, with byte offsets for malformed input and dotted
  field paths for schema violations
- Bundled scenario presets under data/scenarios/
- Result documents (JSON) and result tables (CSV)
"""

import csv
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, StrictInt, ValidationError, field_validator

from hilbert import FieldMode
from perturbation import CouplingContext, TwoLevelAtom
from transactions import Absorber, ResponseKind, ResponseModel, Scenario
from utils import (
    FINE_STRUCTURE,
    LIBRARY_VERSION,
    MAX_SEED,
    RENORMALIZE_FAIL_TOL,
    RENORMALIZE_WARN_TOL,
    STRUCTURAL_TOL,
    ErrorCode,
    ScenarioError,
    SimulationError,
    flatten_complex_columns,
    format_number,
    logger,
    pair_to_complex,
    sanitize_identifier,
    to_jsonable,
)


PRESET_DIR = Path(__file__).parent.parent / "data" / "scenarios"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class EmitterModel(_Strict):
    omega_lower: float
    omega_upper: float


class AbsorberModel(_Strict):
    id: str = Field(..., min_length=1)
    k_vec: Tuple[float, float, float]
    polarization: StrictInt = Field(1, ge=1, le=2)


class ResponseModelDocument(_Strict):
    kind: Literal["always", "bernoulli"]
    p: Optional[float] = Field(None, ge=0.0, le=1.0)


class CouplingModel(_Strict):
    e: float
    m: float = Field(..., gt=0)
    volume: float = Field(..., gt=0)
    p_BA: Tuple[float, float]


class ScenarioDocument(_Strict):
    """Schema of a scenario file."""
    emitter: EmitterModel
    absorbers: List[AbsorberModel] = Field(..., min_length=1)
    offer_amplitudes: List[Tuple[float, float]]
    response_model: ResponseModelDocument = Field(
        default_factory=lambda: ResponseModelDocument(kind="always")
    )
    trials: StrictInt = Field(..., ge=0)
    seed: StrictInt
    coupling: Optional[CouplingModel] = None

    @field_validator("seed")
    @classmethod
    def seed_in_range(cls, value: int) -> int:
        if not 0 <= value <= MAX_SEED:
            raise ValueError(f"seed must lie in [0, {MAX_SEED}]")
        return value


def _byte_offset(text: str, char_index: int) -> int:
    return len(text[:char_index].encode("utf-8"))


def _decode_json(document: bytes) -> Any:
    """Decode UTF-8 JSON, reporting failures with a byte offset."""
    try:
        text = document.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ScenarioError(
            f"Scenario is not valid UTF-8: {exc.reason}",
            {"byte_offset": exc.start},
            ErrorCode.SCENARIO_PARSE,
        ) from exc

    def reject_constant(token: str) -> None:
        raise ScenarioError(
            f"Non-finite number {token} is not allowed",
            {"byte_offset": _byte_offset(text, text.find(token))},
            ErrorCode.SCENARIO_PARSE,
        )

    try:
        return json.loads(text, parse_constant=reject_constant)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"Malformed JSON: {exc.msg}",
            {"byte_offset": _byte_offset(text, exc.pos), "line": exc.lineno, "column": exc.colno},
            ErrorCode.SCENARIO_PARSE,
        ) from exc


def _schema_error(exc: ValidationError) -> ScenarioError:
    first = exc.errors()[0]
    path = ".".join(str(part) for part in first["loc"]) or "$"
    return ScenarioError(
        f"Invalid value at {path}: {first['msg']}",
        {"path": path, "error_count": exc.error_count()},
    )


def _built(path: str, build):
    """Run a constructor, re-raising value errors as schema errors at path."""
    try:
        return build()
    except SimulationError as exc:
        raise ScenarioError(exc.message, {"path": path, **exc.context}) from exc


def _normalize_amplitudes(amplitudes: np.ndarray, warnings: List[str]) -> np.ndarray:
    norm_squared = float(np.sum(np.abs(amplitudes) ** 2))
    deviation = abs(norm_squared - 1.0)

    if deviation > RENORMALIZE_FAIL_TOL or norm_squared == 0.0:
        raise ScenarioError(
            f"Offer amplitudes have squared norm {norm_squared:.6g}, expected 1",
            {"path": "offer_amplitudes", "norm_squared": norm_squared},
        )
    if deviation > RENORMALIZE_WARN_TOL:
        message = f"offer_amplitudes renormalized (squared norm was {norm_squared!r})"
        warnings.append(message)
        logger.warning(message)
    if deviation > STRUCTURAL_TOL:
        amplitudes = amplitudes / math.sqrt(norm_squared)
    return amplitudes


def scenario_from_document(document: ScenarioDocument) -> Tuple[Scenario, List[str]]:
    """
    Build a Scenario from a validated document.

    Returns:
        Tuple of (scenario, warnings).

    Raises:
        ScenarioError: For cross-field violations (amplitude count, norm,
            duplicate ids or modes, invalid physical values).
    """
    warnings: List[str] = []

    if len(document.offer_amplitudes) != len(document.absorbers):
        raise ScenarioError(
            "offer_amplitudes must have one entry per absorber",
            {
                "path": "offer_amplitudes",
                "amplitudes": len(document.offer_amplitudes),
                "absorbers": len(document.absorbers),
            },
        )

    amplitudes = np.array([pair_to_complex(pair) for pair in document.offer_amplitudes])
    amplitudes = _normalize_amplitudes(amplitudes, warnings)

    emitter = _built(
        "emitter",
        lambda: TwoLevelAtom(document.emitter.omega_lower, document.emitter.omega_upper),
    )

    absorbers = []
    for index, item in enumerate(document.absorbers):
        absorbers.append(
            _built(
                f"absorbers.{index}",
                lambda item=item: Absorber(
                    sanitize_identifier(item.id), FieldMode(item.k_vec, item.polarization)
                ),
            )
        )

    kind = ResponseKind(document.response_model.kind)
    p = FINE_STRUCTURE if document.response_model.p is None else document.response_model.p
    response_model = ResponseModel(kind, p)

    coupling = None
    if document.coupling is not None:
        block = document.coupling
        coupling = _built(
            "coupling",
            lambda: CouplingContext(block.e, block.m, block.volume, pair_to_complex(block.p_BA)),
        )

    scenario = _built(
        "absorbers",
        lambda: Scenario(
            emitter=emitter,
            absorbers=tuple(absorbers),
            offer_amplitudes=amplitudes,
            response_model=response_model,
            trials=document.trials,
            seed=document.seed,
            coupling=coupling,
        ),
    )
    return scenario, warnings


def load_scenario_document(document: Union[bytes, str]) -> Tuple[Scenario, List[str]]:
    """
    Parse raw scenario bytes into a Scenario.

    Args:
        document: UTF-8 encoded JSON (str is accepted and encoded).

    Returns:
        Tuple of (scenario, warnings).

    Raises:
        ScenarioError: scenario_parse_error with byte_offset for malformed
            input, scenario_schema_error with path for schema violations.
    """
    if isinstance(document, str):
        document = document.encode("utf-8")

    payload = _decode_json(document)
    try:
        parsed = ScenarioDocument.model_validate(payload)
    except ValidationError as exc:
        raise _schema_error(exc) from exc

    return scenario_from_document(parsed)


def parse_scenario(document: Union[bytes, str]) -> Scenario:
    """Parse scenario bytes; renormalization warnings are logged."""
    scenario, _ = load_scenario_document(document)
    return scenario


def load_scenario_file(path: Union[str, Path]) -> Tuple[Scenario, List[str]]:
    """Read and parse a scenario file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(
            f"Cannot read scenario file: {exc.strerror or exc}",
            {"file": str(path)},
            ErrorCode.SCENARIO_PARSE,
        ) from exc
    logger.debug(f"Loaded scenario file {path} ({len(raw)} bytes)")
    return load_scenario_document(raw)


def list_presets() -> List[str]:
    """Names of the bundled scenario presets."""
    if not PRESET_DIR.exists():
        return []
    return sorted(p.stem for p in PRESET_DIR.glob("*.json"))


def load_preset(name: str) -> Tuple[Scenario, List[str]]:
    """
    Load a bundled scenario preset by name.

    Raises:
        ScenarioError: If no preset of that name exists.
    """
    name = sanitize_identifier(name)
    path = PRESET_DIR / f"{name}.json"
    if not path.exists():
        raise ScenarioError(
            f"Unknown preset: {name}",
            {"preset": name, "available": list_presets()},
            ErrorCode.INVALID_ARGUMENT,
        )
    return load_scenario_file(path)


def scenario_to_document(scenario: Scenario) -> Dict[str, Any]:
    """
    Serialize a Scenario back to the ScenarioDocument layout.

    Parsing the JSON of this dictionary reproduces the same dictionary.
    """
    document: Dict[str, Any] = {
        "emitter": {
            "omega_lower": scenario.emitter.omega_lower,
            "omega_upper": scenario.emitter.omega_upper,
        },
        "absorbers": [
            {
                "id": absorber.id,
                "k_vec": [float(v) for v in absorber.mode.k_vec],
                "polarization": absorber.mode.polarization,
            }
            for absorber in scenario.absorbers
        ],
        "offer_amplitudes": [[float(a.real), float(a.imag)] for a in scenario.offer_amplitudes],
        "response_model": scenario.response_model.to_dict(),
        "trials": scenario.trials,
        "seed": scenario.seed,
    }
    if scenario.coupling is not None:
        coupling = scenario.coupling
        document["coupling"] = {
            "e": coupling.e,
            "m": coupling.m,
            "volume": coupling.volume,
            "p_BA": [coupling.p_ba.real, coupling.p_ba.imag],
        }
    return document


def build_result_document(
    subcommand: str,
    inputs: Dict[str, Any],
    results: Any,
    seed: Optional[int] = None,
    warnings: Sequence[str] = (),
    deterministic: bool = False,
) -> Dict[str, Any]:
    """
    Assemble the JSON result document.

    The generated_at timestamp is omitted when deterministic is set, so
    repeated runs produce byte-identical output.
    """
    document: Dict[str, Any] = {
        "subcommand": subcommand,
        "version": LIBRARY_VERSION,
        "seed": seed,
        "inputs": inputs,
        "results": results,
        "warnings": list(warnings),
    }
    if not deterministic:
        document["generated_at"] = datetime.now(timezone.utc).isoformat()
    return document


def build_error_document(error: SimulationError) -> Dict[str, Any]:
    """Error object {code, message, context} wrapped with the library version."""
    return {"error": error.to_dict(), "version": LIBRARY_VERSION}


def format_json(document: Dict[str, Any]) -> str:
    """
    Format a document as JSON.

    Args:
        document: Result or error document.

    Returns:
        Pretty-printed JSON string with a trailing newline.
    """
    return json.dumps(to_jsonable(document), indent=2, ensure_ascii=False) + "\n"


def format_csv(rows: Iterable[Dict[str, Any]]) -> str:
    """
    Format table rows as CSV.

    Complex values are split into _re/_im columns and floats are written
    with 17 significant digits.
    """
    flat_rows = [flatten_complex_columns(row) for row in rows]
    fieldnames: List[str] = []
    for row in flat_rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)

    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in flat_rows:
        writer.writerow({key: format_number(value) for key, value in row.items()})
    return buffer.getvalue()
