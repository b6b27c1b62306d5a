"""
errors.py — Exception types for dualband_memory
================================================

All errors derive from built-in exception classes so callers can keep
catching ``ValueError`` / ``ArithmeticError`` where that reads naturally.

- SimulationError       base class
- ConfigurationError    invalid configuration (message names the key)
- DomainError           input outside an operation's domain
- ValidityError         approximation used outside its validity range
- NumericalFailure      non-finite state or step-size collapse
- TruncatedSeriesError  metrics requested on an unfinished run
- OracleFailure         validation suite reported a failed check
"""


class SimulationError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(SimulationError, ValueError):
    """
    Raised when a configuration value violates a declared invariant.

    Args:
        message (str): Human readable description.
        key (str, optional): Dotted path of the offending key.
    """

    def __init__(self, message, key=None):
        self.key = key
        if key is not None and key not in message:
            message = f"{key}: {message}"
        super().__init__(message)


class DomainError(SimulationError, ValueError):
    """Raised when an input lies outside the domain of an operation."""


class ValidityError(SimulationError, ValueError):
    """Raised when an analytic approximation is evaluated outside its range."""


class NumericalFailure(SimulationError, ArithmeticError):
    """
    Raised when an integrator produces non-finite values or cannot meet its
    tolerance above the minimum step.

    Attributes:
        tau (float): Retarded time of the failing step (s).
        dt (float): Step size of the failing step (s).
        index (int or None): Grid index involved, when known.
        partial: Results gathered before the failure (set by the caller).
    """

    def __init__(self, message, tau=None, dt=None, index=None):
        self.tau = tau
        self.dt = dt
        self.index = index
        self.partial = None
        details = []
        if tau is not None:
            details.append(f"tau={tau:.6e} s")
        if dt is not None:
            details.append(f"dt={dt:.6e} s")
        if index is not None:
            details.append(f"index={index}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)


class TruncatedSeriesError(SimulationError, ValueError):
    """Raised when a time series ends before its scenario's end time."""


class OracleFailure(SimulationError):
    """Raised when one or more validation checks fail; carries the report."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


__all__ = [
    "SimulationError", "ConfigurationError", "DomainError", "ValidityError",
    "NumericalFailure", "TruncatedSeriesError", "OracleFailure",
]
