"""Exception and warning types shared across the package."""


class HestonForgetError(Exception):
    """Base class for all package errors."""


class PricingError(HestonForgetError):
    """Quadrature produced a non-finite integrand or price.

    Usually signals a quadrature configuration unsuitable for an extreme
    parameter vector.
    """


class FdStepError(HestonForgetError):
    """A finite-difference bump cannot be shrunk into the valid parameter box."""


class NotPositiveDefiniteError(HestonForgetError):
    """Cholesky factorization failed: the damped normal matrix is not PD."""


class UnknownQuoteIdError(HestonForgetError):
    """A forget request referenced a quote id absent from the cache."""


class DatasetHashMismatchError(HestonForgetError):
    """Cache and quote store were built from different datasets."""


class VersionMismatchError(HestonForgetError):
    """Cache file was written by an incompatible format version."""


class CorruptFileError(HestonForgetError):
    """Cache file failed checksum or structural validation."""


class ConditioningWarning(UserWarning):
    """Curvature matrix is close to singular after forgetting."""
