"""
Exception hierarchy for the compressive interferometry toolkit.

The CLI maps these onto its exit codes; library code raises the most
specific subclass available.
"""


class CriRopError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(CriRopError, ValueError):
    """Invalid parameters, missing files or inconsistent configuration."""


class DimensionMismatchError(CriRopError, ValueError):
    """A vector or operand does not match the operator it is applied to."""


class ResourceGuardError(CriRopError):
    """A requested computation exceeds the configured size budget."""


class ValidationSuiteError(CriRopError):
    """A property suite failed; the message names the failing invariant."""

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        message = f"{invariant} failed"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class SolverDivergenceError(CriRopError, RuntimeError):
    """The proximal-gradient objective kept increasing after restarts."""
