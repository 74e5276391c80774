"""Exception hierarchy. Every error carries a short machine-parsable code."""

from __future__ import annotations


class P3dcError(Exception):
    """Base class for all library errors."""

    code = "error"


class ConfigError(P3dcError):
    """Invalid configuration or command-line arguments."""

    code = "config"


class FormatError(P3dcError):
    """Malformed store file.  ``offset`` is the byte position of the problem."""

    code = "format"

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class SchemaError(P3dcError):
    """Manifest and binary disagree, or the manifest itself is inconsistent."""

    code = "schema"


class DataError(P3dcError):
    """Well-formed file containing invalid values (NaN/Inf, sign violations)."""

    code = "data"


class DomainError(P3dcError):
    """Input outside the mathematical domain of a transform."""

    code = "domain"


class DegenerateInputError(P3dcError):
    """Zero vector (or zero combination) where a direction is required."""

    code = "degenerate"


class CapacityError(P3dcError):
    """Dataset too small for the requested episode shape."""

    code = "capacity"


class IOFailure(P3dcError):
    """Filesystem problem while reading or writing an artifact."""

    code = "io"
