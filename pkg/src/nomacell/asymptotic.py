"""Chernoff outage bounds and vanishing-uncertainty rate thresholds.

Valid in the interference-free regime (lambda_b = 0): as the error variance
shrinks, conditional outage drops to zero exactly when the target rates stay
below per-realization thresholds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import NetworkParams, PairConfig
from .outage import EffectiveChannel, outage_thresholds

__all__ = [
    "RateThresholds",
    "chernoff_far_bound",
    "chernoff_near_bound",
    "optimize_chernoff_far",
    "optimize_chernoff_near",
    "rate_thresholds",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RateThresholds:
    """Per-realization rate bounds below which outage vanishes as the
    channel uncertainty does (bps/Hz; inf when a denominator vanishes)."""

    R_kt_max_far: float
    R_kt_max_near: float
    R_k_max_near: float


def _normalized_eigs(eff: EffectiveChannel) -> np.ndarray:
    """Eigenvalues of the error covariance with sigma_h2 factored out."""
    if eff.sigma_h2 <= 0:
        raise ValueError("Chernoff bounds require sigma_h2 > 0")
    return eff.delta / eff.sigma_h2


def chernoff_far_bound(eff: EffectiveChannel, pair: PairConfig,
                       params: NetworkParams, s_bar: float,
                       stream: int = 0) -> float:
    """Chernoff upper bound on the far-user conditional outage at lambda_b=0.

    `s_bar` is the normalized exponent parameter, admissible on
    (0, 1 / max_i upsilon_i).
    """
    ups = _normalized_eigs(eff)
    s_sup = 1.0 / ups.max() if ups.max() > 0 else math.inf
    if not 0.0 < s_bar < s_sup:
        raise ValueError(f"s_bar must lie in (0, {s_sup:.6g})")
    th = outage_thresholds(eff, eff, pair, params, stream)
    nu = eff.mu.copy()
    nu[stream] *= pair.beta_k2
    zeta2 = np.abs(eff.Psi.conj().T @ nu) ** 2
    margin = th.tau_kt + np.sum(zeta2 / (s_bar * ups - 1.0))
    log_pref = -np.sum(np.log1p(-s_bar * ups))
    expo = log_pref - s_bar / eff.sigma_h2 * margin
    return float(np.exp(min(expo, 700.0)))


def chernoff_near_bound(eff: EffectiveChannel, pair: PairConfig,
                        params: NetworkParams, s_hat: float,
                        stream: int = 0) -> float:
    """Chernoff + union upper bound on the near-user conditional outage."""
    ups = _normalized_eigs(eff)
    s_sup = 1.0 / ups.max() if ups.max() > 0 else math.inf
    if not 0.0 < s_hat < s_sup:
        raise ValueError(f"s_hat must lie in (0, {s_sup:.6g})")
    th = outage_thresholds(eff, eff, pair, params, stream)
    mu_k2 = abs(eff.mu[stream]) ** 2
    nu1 = eff.mu.copy()
    nu1[stream] *= pair.beta_k2
    nu2 = eff.mu.copy()
    nu2[stream] = 0.0
    proj1 = np.abs(eff.Psi.conj().T @ nu1) ** 2
    proj2 = np.abs(eff.Psi.conj().T @ nu2) ** 2
    margin1 = (th.theta_kt - pair.beta_k2 * pair.beta_kt2 * mu_k2
               + np.sum(proj1 / (s_hat * ups - 1.0)))
    margin2 = th.theta_k + np.sum(proj2 / (s_hat * ups - 1.0))
    log_pref = -np.sum(np.log1p(-s_hat * ups))
    scale = s_hat / eff.sigma_h2
    return float(np.exp(min(log_pref - scale * margin1, 700.0))
                 + np.exp(min(log_pref - scale * margin2, 700.0)))


def _golden_min(f, lo: float, hi: float, tol: float = 1e-10,
                max_iter: int = 200):
    """Golden-section minimization on [lo, hi]."""
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a < tol * (abs(a) + abs(b) + 1e-30):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def optimize_chernoff_far(eff: EffectiveChannel, pair: PairConfig,
                          params: NetworkParams,
                          stream: int = 0) -> tuple[float, float]:
    """Minimize the far-user Chernoff bound over its free parameter.

    Returns (bound, s_bar).  The admissible interval is searched with a
    1e-6 relative boundary margin.
    """
    ups = _normalized_eigs(eff)
    if ups.max() <= 0:
        raise ValueError("degenerate error covariance: no free parameter range")
    s_sup = 1.0 / ups.max()
    lo, hi = 1e-6 * s_sup, (1.0 - 1e-6) * s_sup
    s_best, val = _golden_min(
        lambda s: chernoff_far_bound(eff, pair, params, s, stream), lo, hi)
    return val, s_best


def optimize_chernoff_near(eff: EffectiveChannel, pair: PairConfig,
                           params: NetworkParams,
                           stream: int = 0) -> tuple[float, float]:
    """Minimize the near-user Chernoff bound over its free parameter."""
    ups = _normalized_eigs(eff)
    if ups.max() <= 0:
        raise ValueError("degenerate error covariance: no free parameter range")
    s_sup = 1.0 / ups.max()
    lo, hi = 1e-6 * s_sup, (1.0 - 1e-6) * s_sup
    s_best, val = _golden_min(
        lambda s: chernoff_near_bound(eff, pair, params, s, stream), lo, hi)
    return val, s_best


def rate_thresholds(eff_far: EffectiveChannel, eff_near: EffectiveChannel,
                    pair: PairConfig, params: NetworkParams,
                    stream: int = 0) -> RateThresholds:
    """Rate bounds of the vanishing-uncertainty regime (lambda_b = 0).

    Below these bounds (strictly) the conditional outage of the respective
    decoding stage decays to zero as sigma_h2 -> 0; above the far bound it
    climbs to one.
    """
    b2, bt2 = pair.beta_k2, pair.beta_kt2
    noise_far = eff_far.sigma_u2 / (params.P * params.path_loss(pair.d_kt))
    noise_near = eff_near.sigma_u2 / (params.P * params.path_loss(pair.d_k))

    mu_far2 = abs(eff_far.mu[stream]) ** 2
    nu_far = eff_far.mu.copy()
    nu_far[stream] *= b2
    zeta2 = np.abs(eff_far.Psi.conj().T @ nu_far) ** 2
    denom_far = zeta2.sum() + b2 * bt2 * mu_far2 + noise_far
    far = math.log2(1.0 + bt2 * mu_far2 / denom_far) if denom_far > 0 else math.inf

    mu_near2 = abs(eff_near.mu[stream]) ** 2
    nu1 = eff_near.mu.copy()
    nu1[stream] *= b2
    nu2 = eff_near.mu.copy()
    nu2[stream] = 0.0
    proj1 = np.abs(eff_near.Psi.conj().T @ nu1) ** 2
    proj2 = np.abs(eff_near.Psi.conj().T @ nu2) ** 2
    denom_sic = proj1.sum() + b2 * bt2 * mu_near2 + noise_near
    denom_own = proj2.sum() + noise_near
    near_sic = math.log2(1.0 + bt2 * mu_near2 / denom_sic) if denom_sic > 0 else math.inf
    near_own = math.log2(1.0 + b2 * mu_near2 / denom_own) if denom_own > 0 else math.inf
    return RateThresholds(far, near_sic, near_own)
