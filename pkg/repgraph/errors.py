"""
Exception hierarchy shared by the library and the command line.

Every error carries the process exit code the CLI reports for it.
"""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class RepgraphError(Exception):
    """Root of all errors raised by repgraph."""

    exit_code = EXIT_USAGE


class DatasetError(RepgraphError):
    """Malformed, incomplete or out-of-domain dataset input."""


class FamilyMismatchError(RepgraphError):
    """An operation was asked to work on a family it does not support."""


class DimensionError(RepgraphError):
    """Lengths or shapes that do not line up."""


class PreconditionError(RepgraphError):
    """Inputs violate a documented precondition (e.g. non-centered Gaussian data)."""


class SimulationError(RepgraphError):
    """A data-generating mechanism could not be constructed."""


class UsageError(RepgraphError):
    """Invalid command-line values."""


class DegenerateProblemError(RepgraphError):
    """A penalized least-squares problem is unbounded or contains non-finite values."""

    exit_code = EXIT_NUMERICAL


class DivergenceError(RepgraphError):
    """An iterate left the admissible region of the linear predictor."""

    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, cap: float):
        super().__init__(message)
        self.cap = cap
