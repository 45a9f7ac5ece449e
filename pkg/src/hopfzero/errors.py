"""Failure taxonomy shared across the package.

The CLI maps these onto process exit codes: condition-gate failures exit 2,
numerical failures exit 3, parse/I-O failures exit 4.
"""

from __future__ import annotations


class HopfZeroError(Exception):
    """Base class for all package-specific failures."""


class ConditionFailure(HopfZeroError):
    """A structural gate on the input field failed (wrong linear part,
    open/generic condition violated, eigenvalue pattern not saddle-focus)."""


class NumericalFailure(HopfZeroError):
    """A numerical procedure could not meet its contract (no bracket, budget
    exhausted, precision insufficient for the requested magnitude)."""


class JetParseError(HopfZeroError):
    """Malformed jet file or run configuration."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column
