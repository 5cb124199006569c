"""NumPy reference implementation of the Heston call pricer.

Semi-analytic pricing: C = S*P1 - K*exp(-r*T)*P2 with the risk-neutral
probabilities P_j recovered from the characteristic function of log-spot by
Fourier inversion on a composite Simpson grid.

The characteristic function is evaluated in the branch-stable ("little trap")
form, with two extra precautions so the vol-of-vol -> 0 limit stays accurate
in double precision:

* (beta - d) is rationalized to sigma_v^2*(2*u_j*i*u - u^2)/(beta + d),
  removing the catastrophic cancellation between beta and d;
* log((1 - g*e^{-dT})/(1 - g)) and 1 - e^{-dT} are computed with log1p /
  expm1 style series for small arguments.
"""

from __future__ import annotations

import numpy as np


def _cexpm1(z: np.ndarray) -> np.ndarray:
    """exp(z) - 1 for complex z, accurate for small |z|."""
    z = np.asarray(z, dtype=np.complex128)
    small = np.abs(z) < 1e-4
    out = np.exp(z) - 1.0
    zs = np.where(small, z, 0.0)
    series = zs * (1.0 + zs * (0.5 + zs * (1.0 / 6.0 + zs / 24.0)))
    return np.where(small, series, out)


def _clog1p(z: np.ndarray) -> np.ndarray:
    """log(1 + z) for complex z, accurate for small |z|."""
    z = np.asarray(z, dtype=np.complex128)
    small = np.abs(z) < 1e-4
    out = np.log(1.0 + z)
    zs = np.where(small, z, 0.0)
    series = zs * (1.0 - zs * (0.5 - zs * (1.0 / 3.0 - zs / 4.0)))
    return np.where(small, series, out)


def char_fn_grid(
    u: np.ndarray,
    j: int,
    kappa: float,
    theta_v: float,
    sigma_v: float,
    rho: float,
    v0: float,
    spot: float,
    maturity: float,
    rate: float,
) -> np.ndarray:
    """phi_j(u) for an array of real frequencies u (j in {1, 2})."""
    u = np.asarray(u, dtype=np.float64)
    iu = 1j * u
    a = kappa * theta_v
    if j == 1:
        b = kappa - rho * sigma_v
        uj = 0.5
    elif j == 2:
        b = kappa
        uj = -0.5
    else:
        raise ValueError(f"j must be 1 or 2, got {j}")

    sig2 = sigma_v * sigma_v
    beta = b - rho * sigma_v * iu
    s = sig2 * (2.0 * uj * iu - u * u)
    d = np.sqrt(beta * beta - s)
    bpd = beta + d
    bm = s / bpd  # beta - d, rationalized
    g = bm / bpd

    em1 = _cexpm1(-d * maturity)  # e^{-dT} - 1
    one_m_edt = -em1
    one_m_gedt = (1.0 - g) - g * em1  # 1 - g*e^{-dT}
    log_ratio = _clog1p(g * one_m_edt / (1.0 - g))

    c_term = rate * iu * maturity + (a / sig2) * (bm * maturity - 2.0 * log_ratio)
    d_term = (bm / sig2) * (one_m_edt / one_m_gedt)
    phi = np.exp(c_term + d_term * v0 + iu * np.log(spot))
    # phi_j(0) = 1 holds for every valid parameter vector; the closed form
    # has a removable 0/0 there when b < 0.
    return np.where(u == 0.0, 1.0 + 0.0j, phi)


def price_call(
    spot: float,
    strike: float,
    maturity: float,
    rate: float,
    kappa: float,
    theta_v: float,
    sigma_v: float,
    rho: float,
    v0: float,
    nodes: np.ndarray,
    weights: np.ndarray,
) -> float:
    """Heston call price on a precomputed Simpson grid (nodes, weights)."""
    iu = 1j * nodes
    pulse = np.exp(-iu * np.log(strike)) / iu
    p = np.empty(2)
    for idx, j in enumerate((1, 2)):
        phi = char_fn_grid(
            nodes, j, kappa, theta_v, sigma_v, rho, v0, spot, maturity, rate
        )
        integrand = np.real(pulse * phi)
        p[idx] = 0.5 + np.dot(weights, integrand) / np.pi
    return spot * p[0] - strike * np.exp(-rate * maturity) * p[1]
