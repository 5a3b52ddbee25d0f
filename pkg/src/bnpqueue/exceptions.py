"""Exception hierarchy shared across the toolkit."""


class BnpQueueError(Exception):
    """Base class for all errors raised by bnpqueue."""


class ConfigurationError(BnpQueueError, ValueError):
    """Invalid model or prior parameters."""


class UnsupportedDataError(BnpQueueError, ValueError):
    """The data contain something the requested operation cannot handle."""


class InstabilityError(BnpQueueError, ArithmeticError):
    """A traffic intensity >= 1 was supplied where a stable queue is required."""


class NumericDomainError(BnpQueueError, ArithmeticError):
    """A transform was evaluated where its denominator vanishes."""


class UndefinedMomentError(BnpQueueError, ArithmeticError):
    """A requested moment does not exist for the given parameters."""


class DegeneratePriorError(BnpQueueError, ArithmeticError):
    """The beta-Stacy update hit a non-positive denominator."""


class TruncationError(BnpQueueError, ArithmeticError):
    """A quadrature could not be closed off at the end of its grid.

    Attributes
    ----------
    tail_bound : float
        Upper bound on the neglected tail contribution.
    """

    def __init__(self, message, tail_bound=float("nan")):
        super().__init__(message)
        self.tail_bound = tail_bound


class InconsistentTruncationError(BnpQueueError, ValueError):
    """Observations or the prior guess live outside the truncation bound."""
