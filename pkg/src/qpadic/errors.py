"""Exception types shared across the package."""


class QpadicError(Exception):
    """Base class for all package-specific errors."""


class DomainError(QpadicError):
    """Input lies outside the validated domain of an operation.

    Raised for invalid primes, characters evaluated off the unit group,
    series evaluated outside their region of convergence, parameter
    configurations the closed forms do not cover, and similar misuse.
    """


class ComputationError(QpadicError):
    """A numeric procedure failed to certify its result.

    Raised when an iteration hits its budget without converging, a zero
    count cannot be certified, or an internal consistency check fails.
    """
