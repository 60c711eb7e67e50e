"""Exception hierarchy shared by every delayfit module.

Each class carries the process exit code the CLI uses when it escapes a
command, so library code raises and the CLI only translates.
"""


class DelayfitError(Exception):
    """Base class for all delayfit failures."""

    exit_code = 1


class ConfigError(DelayfitError):
    """Invalid run configuration. ``field`` is the offending key path."""

    exit_code = 2

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DataError(DelayfitError):
    """Unreadable, malformed or inconsistent input data."""

    exit_code = 3

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(DelayfitError):
    """A function was evaluated outside the interval it is defined on."""

    exit_code = 3

    def __init__(self, message: str, time: float | None = None, sigma: float | None = None):
        self.time = time
        self.sigma = sigma
        super().__init__(message)


class SolverError(DelayfitError):
    """The DDE integrator could not complete the requested span."""

    exit_code = 4

    def __init__(self, message: str, params: dict | None = None):
        self.params = params
        if params:
            detail = ", ".join(f"{k}={v:.6g}" for k, v in params.items())
            message = f"{message} ({detail})"
        super().__init__(message)


class FitError(DelayfitError):
    """A weight fit failed, e.g. a finite-difference solve failed."""

    exit_code = 4


class SamplingError(DelayfitError):
    """Parameter draws kept landing on non-positive rates."""

    exit_code = 4


class AggregationError(DelayfitError):
    """No successful runs to aggregate."""

    exit_code = 4


class EnsembleError(DelayfitError):
    """Too many ensemble runs failed for the aggregates to mean anything."""

    exit_code = 4


class IntegrityError(DelayfitError):
    """Stored report aggregates disagree with the stored per-run records."""

    exit_code = 6


# Not an exception: fit writes its outputs, then exits with this code.
NON_CONVERGENCE_EXIT = 5
