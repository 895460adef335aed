"""
Projection Postulate Engine

State, operator and report files.

States and operators are JSON objects with exactly three fields:

    {"dim": 2, "re": [0.7071067811865476, 0.0], "im": [0.0, 0.7071067811865476]}

For an operator `re` and `im` hold dim * dim entries in row-major order.
Reports are JSON objects written with sorted keys and two-space indentation;
numpy scalars and arrays are converted on the way out and non-finite numbers
are refused.
"""

import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from rapidfuzz import process

from errors import IoError, ParseError
from hilbert import DensityOperator, StateVector
from tolerances import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)

FIELDS = ("dim", "re", "im")

PathLike = Union[str, Path]


# --------------------------------------------------------------------------- #
# Encoding
# --------------------------------------------------------------------------- #

def encode_array(values) -> Dict[str, Any]:
    arr = np.asarray(values, dtype=complex)
    flat = arr.reshape(-1)
    return {
        "dim": int(arr.shape[0]),
        "re": [float(x) for x in flat.real],
        "im": [float(x) for x in flat.imag],
    }


def encode_state(psi: StateVector) -> Dict[str, Any]:
    return encode_array(psi.amplitudes)


def encode_operator(op) -> Dict[str, Any]:
    mat = op.matrix if isinstance(op, DensityOperator) else np.asarray(op, dtype=complex)
    return encode_array(mat)


# --------------------------------------------------------------------------- #
# Decoding
# --------------------------------------------------------------------------- #

def _line_of(text: str, key: str) -> Optional[int]:
    match = re.search(rf'"{re.escape(key)}"\s*:', text)
    if not match:
        return None
    return text.count("\n", 0, match.start()) + 1


def _parse_document(text: str, source: str) -> Dict[str, Any]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"Invalid JSON in {source}: {e.msg}", line=e.lineno, column=e.colno) from e
    if not isinstance(data, dict):
        raise ParseError(f"{source} must contain a JSON object with fields {list(FIELDS)}", line=1)

    for key in data:
        if key not in FIELDS:
            suggestion = process.extractOne(key, FIELDS)
            hint = f"; did you mean '{suggestion[0]}'?" if suggestion and suggestion[1] >= 60 else ""
            raise ParseError(f"Unknown field in {source}{hint}", field=key, line=_line_of(text, key))
    for key in FIELDS:
        if key not in data:
            raise ParseError(f"Missing field in {source}", field=key)
    return data


def _numbers(data: Dict[str, Any], key: str, expected: int, text: str, source: str) -> np.ndarray:
    values = data[key]
    line = _line_of(text, key)
    if not isinstance(values, list):
        raise ParseError(f"Expected a list of numbers in {source}", field=key, line=line)
    if len(values) != expected:
        raise ParseError(f"Expected {expected} entries in {source}, got {len(values)}", field=key, line=line)
    for k, x in enumerate(values):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ParseError(f"Entry {k} is not a number in {source}: {x!r}", field=key, line=line)
    arr = np.array(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"Non-finite entry in {source}", field=key, line=line)
    return arr


def decode(text: str, operator: bool = False, source: str = "<string>") -> Tuple[int, np.ndarray]:
    """(dim, complex array) from the text format; the array is a matrix when `operator` is set."""
    data = _parse_document(text, source)
    dim = data["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ParseError(f"'dim' must be a positive integer in {source}, got {dim!r}", field="dim",
                         line=_line_of(text, "dim"))
    size = dim * dim if operator else dim
    values = _numbers(data, "re", size, text, source) + 1j * _numbers(data, "im", size, text, source)
    return dim, values.reshape((dim, dim)) if operator else values


def _read(path: PathLike) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise IoError(f"Cannot read {path}: {e}") from e


def _write(path: PathLike, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def load_state(path: PathLike, tol: Tolerances = DEFAULT_TOLERANCES) -> StateVector:
    """Read a unit vector; NormError when it is not normalized within tol.norm."""
    _, amps = decode(_read(path), operator=False, source=str(path))
    psi = StateVector.from_amplitudes(amps, tol=tol)
    logger.info(f"Loaded {psi.dim}-dim state from {path}")
    return psi


def load_operator(path: PathLike) -> np.ndarray:
    _, mat = decode(_read(path), operator=True, source=str(path))
    return mat


def save_state(psi: StateVector, path: PathLike) -> None:
    _write(path, json.dumps(encode_state(psi), indent=2) + "\n")


def save_operator(op, path: PathLike) -> None:
    _write(path, json.dumps(encode_operator(op), indent=2) + "\n")


# --------------------------------------------------------------------------- #
# Reports
# --------------------------------------------------------------------------- #

def to_jsonable(value: Any) -> Any:
    """numpy / complex / dataclass-free conversion for report payloads."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return encode_array(value)
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def dumps_report(report: Dict[str, Any]) -> str:
    try:
        return json.dumps(to_jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"
    except ValueError as e:
        raise IoError(f"Report contains a non-finite number: {e}") from e


def save_report(report: Dict[str, Any], path: PathLike) -> None:
    _write(path, dumps_report(report))
    logger.info(f"Report saved to: {path}")
