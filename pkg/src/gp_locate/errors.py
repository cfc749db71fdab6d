"""Exception hierarchy shared by the library and the command-line tool."""


class GPLocateError(Exception):
    """Base class for all errors raised by :mod:`gp_locate`."""


class ConfigurationError(GPLocateError, ValueError):
    """Invalid scenario configuration or invalid combination of options."""


class DomainError(GPLocateError, ValueError):
    """Argument outside the domain of an operation (bad shape, d <= 0, ...)."""


class NumericalError(GPLocateError, ArithmeticError):
    """A factorization or numerical routine failed.

    Parameters
    ----------
    message : str
    jitter : float, optional
        Largest diagonal jitter attempted before giving up, if relevant.
    """

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


class ContractError(GPLocateError, ValueError):
    """An operation was called on an input that violates its contract."""
