"""Residuals, Gauss-Newton normal equations, and the Levenberg-Marquardt loop.

Aggregates are always accumulated sequentially in strictly ascending quote_id
order so that additive identities (split/merge, downdates) reproduce to the
1e-13 level; parallel evaluation only ever computes per-quote values into
fixed slots before the ordered reduction.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotPositiveDefiniteError
from .market import Quote
from .pricing import (
    FdStepPolicy,
    HestonParams,
    QuadratureConfig,
    price_batch,
    price_jacobian,
)

# kappa, theta_v, sigma_v, rho, v0
DEFAULT_PARAM_BOX = (
    (1e-3, 20.0),
    (1e-4, 1.0),
    (1e-3, 3.0),
    (-0.999, 0.999),
    (1e-4, 1.0),
)


@dataclass(frozen=True)
class GnAggregates:
    """Normal-equation pair: curvature H (5x5) and gradient side G (5,)."""

    H: np.ndarray
    G: np.ndarray
    n_quotes: int


@dataclass(frozen=True)
class QuoteStats:
    """Per-quote sufficient statistics at a reference parameter vector.

    u = w * J^T r (5,) and psi = w * J^T J (5x5, symmetric, rank <= 1).
    """

    quote_id: int
    shard_id: int
    u: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True)
class LmConfig:
    """Levenberg-Marquardt settings.

    mu0=None auto-initializes the damping to 1e-3 * trace(H)/5 at the first
    assembly. An accepted step must decrease the loss after clipping to
    param_box; lambda_ridge is always added on top of the adaptive damping.
    """

    lambda_ridge: float = 1e-6
    mu0: float | None = None
    mu_up: float = 4.0
    mu_down: float = 0.5
    max_iters: int = 50
    grad_tol: float = 1e-10
    step_tol: float = 1e-12
    param_box: tuple = DEFAULT_PARAM_BOX

    def __post_init__(self):
        if not (self.mu_up > 1.0 > self.mu_down > 0.0):
            raise ValueError("need mu_up > 1 > mu_down > 0")
        for name in ("lambda_ridge", "grad_tol", "step_tol"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0")

    def box_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        box = np.asarray(self.param_box, dtype=float)
        return box[:, 0], box[:, 1]


def _sorted_quotes(quotes: list[Quote]) -> list[Quote]:
    return sorted(quotes, key=lambda q: q.quote_id)


def residuals(
    quotes: list[Quote],
    params: HestonParams,
    quad: QuadratureConfig,
    threads: int = 1,
) -> np.ndarray:
    """r_i = y_i - m(x_i; theta), one entry per quote in quote_id order."""
    qs = _sorted_quotes(quotes)
    if not qs:
        return np.empty(0)
    feats = np.array(
        [[q.features.spot, q.features.strike, q.features.maturity, q.features.rate]
         for q in qs]
    )
    prices = price_batch(
        feats[:, 0], feats[:, 1], feats[:, 2], feats[:, 3], params, quad,
        threads=threads,
    )
    y = np.array([q.y for q in qs])
    return y - prices


def assemble(
    quotes: list[Quote],
    params: HestonParams,
    quad: QuadratureConfig,
    fd: FdStepPolicy = FdStepPolicy(),
    threads: int = 1,
) -> tuple[GnAggregates, list[QuoteStats]]:
    """H = sum_i w_i J_i^T J_i and G = sum_i w_i J_i^T r_i plus per-quote stats."""
    qs = _sorted_quotes(quotes)
    n = len(qs)
    res = residuals(qs, params, quad, threads=threads)

    jac = np.empty((n, 5))

    def fill(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            jac[i] = price_jacobian(qs[i].features, params, quad, fd)

    if threads <= 1 or n < 2 * threads:
        fill(0, n)
    else:
        bounds = np.linspace(0, n, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(fill, lo, hi)
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            for fut in futures:
                fut.result()

    H = np.zeros((5, 5))
    G = np.zeros(5)
    stats = []
    for i, q in enumerate(qs):
        psi = q.weight * np.outer(jac[i], jac[i])
        u = q.weight * res[i] * jac[i]
        H += psi
        G += u
        stats.append(QuoteStats(q.quote_id, q.shard_id, u, psi))
    return GnAggregates(H=H, G=G, n_quotes=n), stats


def gn_step(agg: GnAggregates, damping: float) -> np.ndarray:
    """Solve (H + damping*I) delta = G by Cholesky factorization."""
    a = agg.H + damping * np.eye(5)
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            f"H + {damping}*I is not positive definite: {exc}"
        ) from exc
    return scipy.linalg.cho_solve(factor, agg.G, check_finite=False)


def _loss(quotes, params, quad, weights, threads):
    r = residuals(quotes, params, quad, threads=threads)
    return float(np.dot(weights, r * r))


def lm_calibrate(
    quotes: list[Quote],
    theta_ref: HestonParams,
    cfg: LmConfig = LmConfig(),
    quad: QuadratureConfig = None,
    fd: FdStepPolicy = FdStepPolicy(),
    threads: int = 1,
) -> tuple[HestonParams, list[dict]]:
    """Short LM loop (Gauss-Newton with adaptive damping) from theta_ref.

    Returns (theta_star, trace); trace has one entry per outer iteration with
    the loss, damping, gradient norm, step norm, and the termination reason on
    the final entry.
    """
    if quad is None:
        raise ValueError("quad is required")
    lo, hi = cfg.box_arrays()
    theta = theta_ref.as_array()
    if np.any(theta < lo) or np.any(theta > hi):
        raise ValueError(f"theta_ref {theta} outside param_box")

    qs = _sorted_quotes(quotes)
    weights = np.array([q.weight for q in qs])
    loss = _loss(qs, theta_ref, quad, weights, threads)
    mu = cfg.mu0
    trace: list[dict] = []
    reason = "max_iters"

    for iteration in range(cfg.max_iters):
        params = HestonParams.from_array(theta)
        agg, _ = assemble(qs, params, quad, fd, threads=threads)
        if mu is None:
            mu = 1e-3 * float(np.trace(agg.H)) / 5.0
        grad_inf = float(np.abs(agg.G).max())
        entry = {
            "iteration": iteration,
            "loss_before": loss,
            "loss": loss,
            "mu": mu,
            "grad_inf": grad_inf,
            "step_norm": 0.0,
            "n_rejected": 0,
        }
        if grad_inf <= cfg.grad_tol:
            reason = "grad_tol"
            trace.append(entry)
            break

        # damping search: as mu grows the clipped step shrinks to zero, so
        # this loop always terminates via acceptance or step_tol
        small_step = False
        while True:
            delta = gn_step(agg, cfg.lambda_ridge + mu)
            theta_trial = np.clip(theta + delta, lo, hi)
            step_norm = float(np.linalg.norm(theta_trial - theta))
            entry["step_norm"] = step_norm
            entry["mu"] = mu
            if step_norm <= cfg.step_tol:
                small_step = True
                break
            loss_trial = _loss(qs, HestonParams.from_array(theta_trial), quad,
                               weights, threads)
            if loss_trial < loss:
                theta = theta_trial
                loss = loss_trial
                mu = mu * cfg.mu_down
                break
            mu = mu * cfg.mu_up
            entry["n_rejected"] += 1

        entry["loss"] = loss
        trace.append(entry)
        if small_step:
            reason = "step_tol"
            break

    trace[-1]["reason"] = reason
    return HestonParams.from_array(theta), trace


def rmse(
    quotes: list[Quote],
    params: HestonParams,
    quad: QuadratureConfig,
    threads: int = 1,
) -> float:
    """Root mean squared residual over the given quotes."""
    r = residuals(quotes, params, quad, threads=threads)
    return float(np.sqrt(np.mean(r * r)))


def huber_weights(residual_vec: np.ndarray, c: float) -> np.ndarray:
    """w_i = 1 if |r_i| <= c else c/|r_i| (bounded-influence reweighting)."""
    if not c > 0.0:
        raise ValueError(f"threshold c must be > 0, got {c}")
    r = np.abs(np.asarray(residual_vec, dtype=float))
    return np.where(r <= c, 1.0, c / np.maximum(r, c))
