"""Exception hierarchy for the hierarchical SFN toolkit."""

from typing import List, Optional


class HierSfnError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(HierSfnError):
    """Invalid scenario, frame or pilot configuration.

    Collects every offending key so a single run reports all of them.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors: List[str] = list(errors)
        super().__init__("; ".join(self.errors))


class ReferenceDataError(HierSfnError):
    """A reference table or curve file could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None,
                 row: Optional[int] = None, column: Optional[str] = None):
        self.path = path
        self.row = row
        self.column = column
        location = []
        if path:
            location.append(str(path))
        if row is not None:
            location.append(f"row {row}")
        if column:
            location.append(f"column '{column}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class InfeasibleError(HierSfnError):
    """An analytic inversion has no solution for the given inputs."""


class SignalAbsentError(HierSfnError):
    """The channel estimate for a requested stream is numerically zero."""


class EstimationError(HierSfnError):
    """Pilot observations cannot be turned into a channel estimate."""
