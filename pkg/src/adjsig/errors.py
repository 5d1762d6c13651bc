"""Exception types shared across the package."""

from __future__ import annotations


class AdjsigError(Exception):
    """Base class for all package errors."""


class ValidationError(AdjsigError, ValueError):
    """Input data violates a structural invariant."""


class ParseError(ValidationError):
    """A line of a TREC-format file could not be parsed."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class ConfigError(ValidationError):
    """Invalid experiment or method configuration."""


class StageError(AdjsigError):
    """Wraps an error raised inside a named experiment stage."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
