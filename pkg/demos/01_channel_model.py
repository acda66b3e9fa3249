"""Walk through the imperfect-CSI channel model.

Draws a known channel part, builds the correlated error statistics for a
target quality factor, and checks the sampler's covariance empirically.
"""
import numpy as np

from nomacell import (ChannelEstimate, channel_k_factor,
                      error_variance_for_k_factor, exponential_covariance,
                      sample_channel_matrix, sample_error_matrix)

rng = np.random.default_rng(0)
M, N = 3, 2

# Antenna correlation with an exponential profile, coefficient 0.9.
R_t = exponential_covariance(M, 0.9)
R_r = exponential_covariance(N, 0.9)
print("transmit correlation R_t:\n", np.round(R_t.real, 3))

# Known channel part, rescaled to squared Frobenius norm M*N, and the error
# variance matching a 20 dB quality factor.
H_hat = sample_channel_matrix(N, M, M * N, rng)
sigma_h2 = error_variance_for_k_factor(10 ** 2.0, M * N, R_t, R_r)
est = ChannelEstimate(H_hat, R_t, R_r, sigma_h2)
print(f"\nsigma_h^2 = {sigma_h2:.4f} -> quality factor "
      f"{10 * np.log10(channel_k_factor(est)):.1f} dB")

# The sampled errors carry the separable correlation: compare the empirical
# covariance of vec(E) with sigma_h2 * (R_t^T kron R_r).
E = sample_error_matrix(est, rng, size=50_000)
vec = E.transpose(0, 2, 1).reshape(len(E), -1)
emp = (vec.conj().T @ vec / len(vec)).real
want = sigma_h2 * np.kron(R_t.T, R_r).real
print(f"\nmax covariance deviation over {vec.shape[1]}^2 entries: "
      f"{np.abs(emp - want).max():.2e}")
