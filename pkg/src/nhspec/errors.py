"""Exception hierarchy.

The CLI maps these onto exit codes: ConfigError -> 2, NumericalFailure -> 3,
PreconditionError -> 4.
"""


class NHSError(Exception):
    """Base class for all errors raised by this package."""


class ConstructionError(NHSError, ValueError):
    """Invalid parameters passed to a constructor (basis, symbol, rule)."""


class ConfigError(NHSError):
    """Raised when an experiment configuration cannot be parsed or resolved."""


class NumericalFailure(NHSError):
    """A computation ran but its numerical self-checks failed.

    Examples are a Gram matrix that is not positive definite, an eigensolver
    that did not converge, or a monotonicity violation that can only come
    from a software fault.
    """


class PreconditionError(NHSError):
    """The inputs violate a stated hypothesis of the operation."""
