"""Exception hierarchy shared by the solvers, statistics and harness."""

from __future__ import annotations


class D2DAssignError(Exception):
    """Base class for every error raised by this package."""


class DomainError(D2DAssignError, ValueError):
    """An argument lies outside the domain of a function."""


class DegenerateScalesError(DomainError):
    """Exponential-mixture form requested for (nearly) equal scales."""


class ConfigurationError(D2DAssignError):
    """Invalid experiment configuration or CLI override."""


class UnsupportedError(D2DAssignError):
    """A valid request for a combination this package does not evaluate."""


class NumericError(D2DAssignError):
    """A quadrature or series failed to reach its tolerance.

    ``estimate`` holds the best value obtained before giving up.
    """

    def __init__(self, message: str, estimate: float | None = None) -> None:
        super().__init__(message)
        self.estimate = estimate

    def __reduce__(self):
        return type(self), (str(self), self.estimate)


class SeriesNotConvergedError(NumericError):
    pass


class InfeasibleError(D2DAssignError):
    """No assignment serves every cellular link with its QoS."""


class CapacityError(D2DAssignError):
    """Instance too large for the requested exact method."""


class AssignmentError(D2DAssignError):
    """An assignment violates one of the sharing or QoS constraints."""

    def __init__(self, violations: list[str]) -> None:
        super().__init__("; ".join(violations))
        self.violations = list(violations)

    def __reduce__(self):
        return type(self), (self.violations,)
