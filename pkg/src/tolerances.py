"""
Projection Postulate Engine

Central tolerance record. Every numeric routine takes a `tol: Tolerances`
keyword defaulting to DEFAULT_TOLERANCES; overrides come from a JSON file
(--tolerances / POSTULATE_TOLERANCES_FILE) or from --tol key=value flags.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from rapidfuzz import process

from errors import ConfigError, IoError, ParseError

logger = logging.getLogger(__name__)

TOLERANCES_ENV_VAR = "POSTULATE_TOLERANCES_FILE"


@dataclass(frozen=True)
class Tolerances:
    norm: float = 1e-10
    herm: float = 1e-10
    psd: float = 1e-9
    eig: float = 1e-8
    recon: float = 1e-9
    prob: float = 1e-12
    # bounds used by the CLI checks
    theorem: float = 1e-10
    support: float = 1e-12
    bayes: float = 1e-12
    sampled_factor: float = 5.0

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]

    def with_overrides(self, overrides: Optional[Mapping[str, Any]]) -> "Tolerances":
        """Return a copy with the given fields replaced. Unknown names and non-positive values are rejected."""
        if not overrides:
            return self
        known = self.names()
        cleaned: Dict[str, float] = {}
        for key, value in overrides.items():
            if key not in known:
                suggestion = process.extractOne(key, known)
                hint = f"; did you mean '{suggestion[0]}'?" if suggestion and suggestion[1] >= 60 else ""
                raise ConfigError(f"Unknown tolerance '{key}'{hint}")
            try:
                number = float(value)
            except (TypeError, ValueError):
                raise ConfigError(f"Tolerance '{key}' must be a number, got {value!r}")
            if not number > 0.0:
                raise ConfigError(f"Tolerance '{key}' must be positive, got {number}")
            cleaned[key] = number
        return replace(self, **cleaned)

    def sampled_bound(self, shots: int) -> float:
        """Elementwise error bound for a SAMPLED reconstruction at the given shot count."""
        return self.sampled_factor / float(shots) ** 0.5

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


DEFAULT_TOLERANCES = Tolerances()


def load_tolerances(path: Optional[Union[str, Path]] = None,
                    base: Tolerances = DEFAULT_TOLERANCES) -> Tolerances:
    """Load tolerance overrides from `path`, or from $POSTULATE_TOLERANCES_FILE when no path is given."""
    if path is None:
        path = os.environ.get(TOLERANCES_ENV_VAR)
        if not path:
            return base
        logger.info(f"Using tolerance overrides from ${TOLERANCES_ENV_VAR}: {path}")
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise IoError(f"Cannot read tolerance file {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"Invalid JSON in tolerance file {path}: {e.msg}", line=e.lineno, column=e.colno) from e
    if not isinstance(data, dict):
        raise ParseError(f"Tolerance file {path} must contain a JSON object")
    return base.with_overrides(data)
