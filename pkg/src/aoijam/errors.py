"""Exception types shared across the package."""

from __future__ import annotations


class AoiError(Exception):
    """Base class for all package errors."""


class ValidationError(AoiError, ValueError):
    """Raised when a configuration or pmf violates one or more invariants.

    ``issues`` holds one ``(key_path, message)`` pair per violation so callers
    can report every problem at once instead of the first one only.
    """

    def __init__(self, issues):
        if isinstance(issues, str):
            issues = [("", issues)]
        self.issues = list(issues)
        lines = [f"{k}: {m}" if k else m for k, m in self.issues]
        super().__init__("; ".join(lines))


class InfeasibleError(AoiError):
    """No pmf over the power levels meets the average-power budget."""


class NoneAboveError(AoiError):
    """The budget exceeds every available power level."""


class TopologyError(AoiError):
    """Operation requires every user to see every channel."""


class DivergentError(AoiError):
    """Average age is infinite because some user is never served."""


class StructureError(AoiError):
    """The success matrix lacks the shift structure required by the caller."""
