class HistentError(Exception):
    """Base class for package errors."""


class InputError(HistentError, ValueError):
    """Malformed schedule, circuit file or command-line options."""


class NumericalInvariantError(HistentError, ArithmeticError):
    """A numerical invariant (normalization, positivity, convergence) failed."""
