"""Heston European-call pricing: types, quadrature, and parameter Jacobians.

Two interchangeable pricing backends implement the same Fourier/Simpson
algorithm: a compiled Cython kernel (built at install time) and a NumPy
reference. The backend is selected once at import; set HESTONFORGET_PURE=1
to force the pure-Python path, e.g. to compare the two.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import FdStepError, PricingError
from . import _reference

try:
    from . import _kernels
except ImportError:  # pure checkout or build without the extension
    _kernels = None

_FORCE_PURE = os.environ.get("HESTONFORGET_PURE", "") not in ("", "0")
_BACKEND = "cython" if (_kernels is not None and not _FORCE_PURE) else "python"

PARAM_NAMES = ("kappa", "theta_v", "sigma_v", "rho", "v0")


def available_backends() -> tuple[str, ...]:
    return ("cython", "python") if _kernels is not None else ("python",)


def active_backend() -> str:
    return _BACKEND


def set_backend(name: str) -> None:
    """Switch pricing backend (used by the backend benchmark and tests)."""
    global _BACKEND
    if name not in available_backends():
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    _BACKEND = name


@dataclass(frozen=True)
class HestonParams:
    """Model parameter vector (kappa, theta_v, sigma_v, rho, v0).

    kappa:   mean-reversion speed of variance (1/years)
    theta_v: long-run variance level
    sigma_v: volatility of variance
    rho:     correlation between spot and variance shocks
    v0:      initial variance

    The Feller condition 2*kappa*theta_v >= sigma_v**2 is deliberately not
    enforced; the pricer and simulator handle parameter sets that violate it.
    """

    kappa: float
    theta_v: float
    sigma_v: float
    rho: float
    v0: float

    def __post_init__(self):
        for name in ("kappa", "theta_v", "sigma_v", "v0"):
            value = getattr(self, name)
            if not (value > 0.0) or not math.isfinite(value):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if not (-1.0 < self.rho < 1.0):
            raise ValueError(f"rho must be in (-1, 1), got {self.rho}")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.kappa, self.theta_v, self.sigma_v, self.rho, self.v0]
        )

    @classmethod
    def from_array(cls, theta: np.ndarray) -> "HestonParams":
        k, tv, sv, r, v = (float(x) for x in theta)
        return cls(k, tv, sv, r, v)


@dataclass(frozen=True)
class QuoteFeatures:
    """Market features of one European call quote: (S, K, T, r)."""

    spot: float
    strike: float
    maturity: float
    rate: float

    def __post_init__(self):
        if not (self.spot > 0.0 and self.strike > 0.0 and self.maturity > 0.0):
            raise ValueError(
                f"spot, strike, maturity must be positive, got "
                f"({self.spot}, {self.strike}, {self.maturity})"
            )


@dataclass(frozen=True)
class QuadratureConfig:
    """Composite Simpson rule on [u_floor, u_max] with n_sub sub-intervals.

    u_floor replaces u=0 to avoid the 1/(iu) singularity; the integrand has a
    finite u->0 limit so the truncation error is negligible (< 1e-10).
    """

    u_max: float
    n_sub: int
    u_floor: float = 1e-8

    def __post_init__(self):
        if not (self.u_max > self.u_floor > 0.0):
            raise ValueError(
                f"need u_max > u_floor > 0, got ({self.u_max}, {self.u_floor})"
            )
        if self.n_sub < 2 or self.n_sub % 2 != 0:
            raise ValueError(f"n_sub must be even and >= 2, got {self.n_sub}")


@lru_cache(maxsize=None)
def simpson_rule(quad: QuadratureConfig) -> tuple[np.ndarray, np.ndarray]:
    """Precomputed (nodes, weights), cached per QuadratureConfig."""
    nodes = np.linspace(quad.u_floor, quad.u_max, quad.n_sub + 1)
    h = (quad.u_max - quad.u_floor) / quad.n_sub
    weights = np.full(quad.n_sub + 1, 2.0)
    weights[1::2] = 4.0
    weights[0] = weights[-1] = 1.0
    weights *= h / 3.0
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@dataclass(frozen=True)
class FdStepPolicy:
    """Central-difference step policy for parameter Jacobians.

    Step for coordinate k is max(rel_step*|theta_k|, abs_floor), halved while
    a bumped vector leaves the valid parameter domain, never below min_step.
    """

    rel_step: float = 1e-5
    abs_floor: float = 1e-7
    min_step: float = 1e-9
    shrink: float = 0.5


def _in_domain(theta: np.ndarray) -> bool:
    return bool(
        theta[0] > 0.0
        and theta[1] > 0.0
        and theta[2] > 0.0
        and theta[4] > 0.0
        and -1.0 < theta[3] < 1.0
    )


def char_fn(u: float, j: int, params: HestonParams, features: QuoteFeatures) -> complex:
    """Characteristic function phi_j(u) of log-spot at maturity, j in {1, 2}."""
    out = _reference.char_fn_grid(
        np.array([u]), j,
        params.kappa, params.theta_v, params.sigma_v, params.rho, params.v0,
        features.spot, features.maturity, features.rate,
    )
    return complex(out[0])


def price_call(
    features: QuoteFeatures, params: HestonParams, quad: QuadratureConfig
) -> float:
    """Semi-analytic Heston call price S*P1 - K*exp(-rT)*P2."""
    nodes, weights = simpson_rule(quad)
    args = (
        features.spot, features.strike, features.maturity, features.rate,
        params.kappa, params.theta_v, params.sigma_v, params.rho, params.v0,
        nodes, weights,
    )
    if _BACKEND == "cython":
        price = _kernels.price_call(*args)
    else:
        price = _reference.price_call(*args)
    if not math.isfinite(price):
        raise PricingError(
            f"non-finite price for {features} at {params}; "
            f"quadrature {quad} unsuitable for these parameters"
        )
    return price


def price_batch(
    spot: np.ndarray,
    strike: np.ndarray,
    maturity: np.ndarray,
    rate: np.ndarray,
    params: HestonParams,
    quad: QuadratureConfig,
    threads: int = 1,
) -> np.ndarray:
    """Price a vector of quotes at one parameter vector.

    With the compiled backend and threads > 1 the quotes are chunked across a
    thread pool (the kernel releases the GIL); results are written into fixed
    slots so the output is independent of the thread schedule.
    """
    nodes, weights = simpson_rule(quad)
    n = len(spot)
    out = np.empty(n)
    spot = np.ascontiguousarray(spot, dtype=np.float64)
    strike = np.ascontiguousarray(strike, dtype=np.float64)
    maturity = np.ascontiguousarray(maturity, dtype=np.float64)
    rate = np.ascontiguousarray(rate, dtype=np.float64)

    if _BACKEND == "cython":
        scalars = (params.kappa, params.theta_v, params.sigma_v, params.rho, params.v0)
        if threads <= 1 or n < 2 * threads:
            _kernels.price_batch(
                spot, strike, maturity, rate, *scalars, nodes, weights, out
            )
        else:
            bounds = np.linspace(0, n, threads + 1).astype(int)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [
                    pool.submit(
                        _kernels.price_batch,
                        spot[lo:hi], strike[lo:hi], maturity[lo:hi], rate[lo:hi],
                        *scalars, nodes, weights, out[lo:hi],
                    )
                    for lo, hi in zip(bounds[:-1], bounds[1:])
                    if hi > lo
                ]
                for fut in futures:
                    fut.result()
    else:
        for i in range(n):
            out[i] = _reference.price_call(
                spot[i], strike[i], maturity[i], rate[i],
                params.kappa, params.theta_v, params.sigma_v, params.rho,
                params.v0, nodes, weights,
            )
    if not np.isfinite(out).all():
        raise PricingError("non-finite price in batch; quadrature unsuitable")
    return out


def price_jacobian(
    features: QuoteFeatures,
    params: HestonParams,
    quad: QuadratureConfig,
    fd: FdStepPolicy = FdStepPolicy(),
) -> np.ndarray:
    """Central-difference sensitivity of the call price to each parameter."""
    theta = params.as_array()
    jac = np.empty(5)
    for k in range(5):
        h = max(fd.rel_step * abs(theta[k]), fd.abs_floor)
        while True:
            up = theta.copy()
            dn = theta.copy()
            up[k] += h
            dn[k] -= h
            if _in_domain(up) and _in_domain(dn):
                break
            h *= fd.shrink
            if h < fd.min_step:
                raise FdStepError(
                    f"cannot bump {PARAM_NAMES[k]}={theta[k]} inside the valid "
                    f"domain with step >= {fd.min_step}"
                )
        p_up = price_call(features, HestonParams.from_array(up), quad)
        p_dn = price_call(features, HestonParams.from_array(dn), quad)
        jac[k] = (p_up - p_dn) / (2.0 * h)
    return jac
