"""Exception types shared across the package."""


class QcertError(Exception):
    """Base class for all package errors."""


class ArgumentError(QcertError, ValueError):
    """An argument violates a documented precondition."""


class CapacityError(QcertError):
    """A requested operation would exceed the configured total-dimension cap."""


class DataError(QcertError):
    """Supplied experimental data is internally inconsistent."""


class NumericalConsistencyError(QcertError):
    """A quantity that must be real/normalized came out numerically off."""


class SolverFailureError(QcertError):
    """The SDP solver did not return a usable solution."""
