"""
Projection Postulate Engine

Exception hierarchy. Library code raises these; the CLI maps them onto its
exit-status contract (see postulate_script.py).
"""

from typing import Optional


class PostulateError(Exception):
    """Base class for every error raised by the engine."""


class NormError(PostulateError):
    pass


class DimMismatch(PostulateError):
    pass


class NotOrthonormal(PostulateError):
    pass


class NotHermitian(PostulateError):
    pass


class NotPositive(PostulateError):
    pass


class GroupingAmbiguous(PostulateError):
    pass


class DuplicateEigenvalue(PostulateError):
    pass


class SpanMismatch(PostulateError):
    pass


class ZeroProbabilityOutcome(PostulateError):
    pass


class DegenerateSpectrum(PostulateError):
    pass


class UnknownOutcome(PostulateError):
    pass


class NotInEigenspace(PostulateError):
    pass


class OracleRangeError(PostulateError):
    pass


class BlockMissing(PostulateError):
    pass


class ConfigError(PostulateError):
    pass


class IoError(PostulateError):
    pass


class UsageError(PostulateError):
    pass


class ParseError(PostulateError):
    """Malformed state/operator file. Carries the offending field and position when known."""

    def __init__(self, message: str, field: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        location = []
        if field is not None:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column {column}")
        full = f"{message} ({', '.join(location)})" if location else message
        super().__init__(full)
        self.field = field
        self.line = line
        self.column = column
