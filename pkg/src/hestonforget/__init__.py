"""Heston calibration with exact selective-forgetting operators."""

__version__ = "0.1.0"

from .pricing import (
    FdStepPolicy,
    HestonParams,
    QuadratureConfig,
    QuoteFeatures,
    active_backend,
    char_fn,
    price_call,
    price_jacobian,
)

__all__ = [
    "FdStepPolicy",
    "HestonParams",
    "QuadratureConfig",
    "QuoteFeatures",
    "active_backend",
    "char_fn",
    "price_call",
    "price_jacobian",
    "__version__",
]
