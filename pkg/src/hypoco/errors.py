"""Exception hierarchy shared by all hypoco modules."""


class HypocoError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(HypocoError, ValueError):
    """An input violates a documented precondition."""


class UnstableDriftError(InvalidArgumentError):
    """The drift matrix has an eigenvalue with nonpositive real part where
    a stable (ergodic) drift is required."""


class UnsupportedSizeError(InvalidArgumentError):
    """The problem size exceeds what an exact algorithm is willing to handle."""


class NumericalFailureError(HypocoError, RuntimeError):
    """A numerical routine failed to produce a trustworthy result
    (eigensolver breakdown, overflow, NaN blow-up, ...)."""
