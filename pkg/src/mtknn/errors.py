"""Exception types shared across the package."""

from __future__ import annotations


class ContractViolation(ValueError):
    """An operation was called with arguments outside its precondition."""


class ArffError(ValueError):
    """Malformed ARFF or CSV input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CaseInapplicable(Exception):
    """A metamorphic relation cannot be instantiated for the given source case."""


class ConfigError(ValueError):
    """Invalid experiment or generator configuration."""
