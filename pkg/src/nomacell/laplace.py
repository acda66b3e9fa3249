"""Numerical Laplace inversion kernels.

One-dimensional inversion follows the Euler-summation method on the
Bromwich line; the two-dimensional kernel uses a trapezoidal double
Fourier series with Wynn-epsilon tail extrapolation.  Both kernels treat
the transform as a black box evaluated on vertical contours with
Re > 0, so fractional powers s**(2/alpha) stay on the principal branch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

__all__ = [
    "Inversion1DConfig",
    "Inversion2DConfig",
    "invert_1d",
    "invert_2d",
    "epsilon_accelerate",
]


@dataclass(frozen=True)
class Inversion1DConfig:
    """Euler-summation inversion parameters.

    `A` controls the discretization error exp(-A)/(1 - exp(-A));
    `m_euler` and `q` are the Euler averaging and truncation orders.
    """

    A: float = 23.5
    m_euler: int = 11
    q: int = 15

    def __post_init__(self):
        if self.A <= 0 or self.m_euler < 0 or self.q < 0:
            raise ValueError("invalid 1D inversion configuration")

    @property
    def discretization_error(self) -> float:
        e = math.exp(-self.A)
        return e / (1.0 - e)


@dataclass(frozen=True)
class Inversion2DConfig:
    """Trapezoidal 2D inversion parameters.

    Each axis gets a sampling half-period of 1.25 times its evaluation
    abscissa (keeping the argument well inside one period even when the two
    abscissae are far apart); `square_period` ties both axes to the larger
    one, which keeps the transform arguments constant along anti-diagonals
    (cheaper for transforms of s + t).  `L` is the series truncation order,
    `p_eps` the epsilon-extrapolation depth (2 * p_eps + 1 partial sums)
    and `e_r` the discretization error target fixing the contour abscissae
    c1, c2 unless given explicitly.
    """

    L: int = 80
    p_eps: int = 8
    e_r: float = 1e-8
    T: float | None = None
    c1: float | None = None
    c2: float | None = None
    square_period: bool = False

    def __post_init__(self):
        if self.L < 1 or self.p_eps < 1 or not 0 < self.e_r < 1:
            raise ValueError("invalid 2D inversion configuration")

    def resolve(self, theta1: float, theta2: float
                ) -> tuple[float, float, float, float]:
        """Concrete (T1, T2, c1, c2) for an evaluation point."""
        if self.T is not None:
            T1 = T2 = self.T
        elif self.square_period:
            T1 = T2 = 1.25 * max(theta1, theta2)
        else:
            T1, T2 = 1.25 * theta1, 1.25 * theta2
        c1 = self.c1 if self.c1 is not None else -math.log(0.01 * self.e_r) / (2 * T1)
        xi = math.exp(-2 * T1 * c1)
        if xi >= self.e_r:
            raise ValueError("contour abscissa c1 too small: exp(-2*T1*c1) >= e_r")
        c2 = self.c2 if self.c2 is not None else -math.log(self.e_r / (1 - xi)) / (2 * T2)
        return T1, T2, c1, c2


def invert_1d(transform, tau: float, config: Inversion1DConfig | None = None) -> float:
    """Invert a 1D Laplace transform at abscissa tau > 0.

    `transform` must accept a complex ndarray and return the transform
    values elementwise.  Returns the Euler-summation estimate
    (2^-M e^{A/2} / tau) * sum_m C(M, m) [Re F(A / 2 tau) / 2
        + sum_{n=1}^{Q+m} (-1)^n Re F((A + 2 n pi i) / 2 tau)].
    """
    if tau <= 0:
        raise ValueError("inversion abscissa tau must be positive")
    cfg = config or Inversion1DConfig()
    A, M, Q = cfg.A, cfg.m_euler, cfg.q
    n = np.arange(0, Q + M + 1)
    s = (A + 2j * math.pi * n) / (2.0 * tau)
    vals = np.real(np.asarray(transform(s), dtype=complex))
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("transform returned non-finite values on the contour")
    terms = np.empty_like(vals)
    terms[0] = 0.5 * vals[0]
    terms[1:] = np.where(n[1:] % 2 == 1, -vals[1:], vals[1:])
    partial = np.cumsum(terms)
    m = np.arange(0, M + 1)
    weights = comb(M, m) / 2.0 ** M
    return float(math.exp(A / 2.0) / tau * np.dot(weights, partial[Q + m]))


def epsilon_accelerate(partial_sums, return_diagnostics: bool = False):
    """Wynn epsilon extrapolation of a sequence of partial sums.

    Expects an odd number (>= 3) of partial sums and returns the final
    even-column table entry.  A numerically singular table (difference
    below 1e-300) stops the recursion and returns the best value reached
    so far; with `return_diagnostics` the degradation flag is reported.
    """
    sums = np.asarray(partial_sums)
    n = len(sums)
    if n < 3 or n % 2 == 0:
        raise ValueError("epsilon acceleration needs an odd number >= 3 of partial sums")
    e_prev = np.zeros(n + 1, dtype=complex)
    e_curr = sums.astype(complex)
    best = e_curr[-1]
    degraded = False
    for k in range(1, n):
        diff = e_curr[1:] - e_curr[:-1]
        if np.any(np.abs(diff) < 1e-300):
            degraded = True
            break
        e_next = e_prev[1:len(e_curr)] + 1.0 / diff
        e_prev, e_curr = e_curr, e_next
        if k % 2 == 0:
            best = e_curr[-1]
    value = best if np.iscomplexobj(sums) else float(best.real)
    if return_diagnostics:
        return value, degraded
    return value


def invert_2d(transform, theta1: float, theta2: float,
              config: Inversion2DConfig | None = None,
              full_output: bool = False):
    """Invert a 2D Laplace transform at (theta1, theta2), both > 0.

    `transform` is called once with broadcastable complex grids (column of
    s values, row of t values) and must return the elementwise transform.
    Tail sums over both indices are extrapolated with the epsilon
    algorithm using 2 * p_eps + 1 partial sums.
    """
    if theta1 <= 0 or theta2 <= 0:
        raise ValueError("inversion abscissae must be positive")
    cfg = config or Inversion2DConfig()
    T1, T2, c1, c2 = cfg.resolve(theta1, theta2)
    L, P = cfg.L, cfg.p_eps
    n_max = L + 2 * P
    l1 = np.arange(0, n_max + 1)
    l2 = np.arange(-n_max, n_max + 1)
    s = c1 + 1j * math.pi * l1 / T1
    t = c2 + 1j * math.pi * l2 / T2
    F = np.asarray(transform(s[:, None], t[None, :]), dtype=complex)
    if not np.all(np.isfinite(F)):
        raise FloatingPointError("transform returned non-finite values on the contour")
    E1 = np.exp(1j * math.pi * l1 * theta1 / T1)
    E2 = np.exp(1j * math.pi * l2 * theta2 / T2)
    W = F * E1[:, None] * E2[None, :]

    zero = n_max  # column index of l2 == 0
    # Row l1 >= 1 pairs the +l2 and -l2 phase terms; row 0 keeps only +l2
    # (the formula's single sum over l2) plus half of the corner term so
    # that the final 2*Re recovers F(c1, c2) once.
    inner = W[:, zero + 1:] + W[:, zero - 1::-1]
    inner[0, :] = W[0, zero + 1:]
    inner_cum = np.cumsum(inner, axis=1)
    degraded = False
    rows = np.empty(n_max + 1, dtype=complex)
    for i in range(n_max + 1):
        rows[i], d = epsilon_accelerate(inner_cum[i, L - 1:L + 2 * P],
                                        return_diagnostics=True)
        degraded |= d
    rows[0] += 0.5 * W[0, zero]
    rows[1:] += W[1:, zero]
    total, d = epsilon_accelerate(np.cumsum(rows)[L - 1:L + 2 * P],
                                  return_diagnostics=True)
    degraded |= d
    value = float(math.exp(c1 * theta1 + c2 * theta2) / (4.0 * T1 * T2)
                  * 2.0 * total.real)
    if full_output:
        return value, {"epsilon_degraded": degraded, "T1": T1, "T2": T2,
                       "c1": c1, "c2": c2}
    return value
