import math
from dataclasses import replace

import numpy as np
import pytest

from nomacell import (ChannelEstimate, GroupingPolicy, Inversion1DConfig,
                      NetworkParams, PairConfig, effective_channel,
                      exponential_covariance, far_outage_average,
                      far_outage_conditional, invert_1d, near_outage_average,
                      near_outage_conditional_approx, near_outage_conditional_exact,
                      outage_thresholds, sample_channel_matrix,
                      single_stream_outage_conditional)
from nomacell.outage import _quadform_transform_1d, _scaled_vector


def _unit_rows(mat):
    return mat / np.linalg.norm(mat, axis=0, keepdims=True)


class TestEffectiveChannel:
    def test_zero_error_gives_zero_covariance(self, table_params, rng):
        H = sample_channel_matrix(2, 3, 6.0, rng)
        est = ChannelEstimate(H, exponential_covariance(3, 0.9),
                              exponential_covariance(2, 0.9), 0.0)
        V = _unit_rows(rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2)))
        u = rng.normal(size=2) + 1j * rng.normal(size=2)
        eff = effective_channel(est, V, u, table_params)
        assert np.all(eff.delta == 0)
        assert np.allclose(eff.Sigma, 0)

    def test_isotropic_error(self, table_params, rng):
        # identity profiles with orthonormal V: Sigma = sigma_h2 |u|^2 I
        H = sample_channel_matrix(2, 3, 6.0, rng)
        est = ChannelEstimate(H, np.eye(3, dtype=complex),
                              np.eye(2, dtype=complex), 0.04)
        V, _ = np.linalg.qr(rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2)))
        u = rng.normal(size=2) + 1j * rng.normal(size=2)
        eff = effective_channel(est, V, u, table_params)
        want = 0.04 * np.linalg.norm(u) ** 2
        assert np.allclose(eff.Sigma, want * np.eye(2), atol=1e-12)
        assert np.allclose(eff.delta, want)

    def test_trace_identity(self, table_params, rng):
        H = sample_channel_matrix(2, 3, 6.0, rng)
        est = ChannelEstimate(H, exponential_covariance(3, 0.9),
                              exponential_covariance(2, 0.9), 0.01)
        V = _unit_rows(rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2)))
        u = rng.normal(size=2) + 1j * rng.normal(size=2)
        eff = effective_channel(est, V, u, table_params)
        want = 0.01 * (u.conj() @ est.R_r @ u).real * np.trace(
            V.conj().T @ est.R_t @ V).real
        assert np.trace(eff.Sigma).real == pytest.approx(want, abs=1e-10)
        # eigendecomposition reconstructs the covariance
        recon = (eff.Psi * eff.delta) @ eff.Psi.conj().T
        assert np.allclose(recon, eff.Sigma, atol=1e-10)

    def test_rejects_unnormalized_precoder(self, table_params, rng):
        H = sample_channel_matrix(2, 3, 6.0, rng)
        est = ChannelEstimate(H, np.eye(3, dtype=complex),
                              np.eye(2, dtype=complex), 0.01)
        with pytest.raises(ValueError, match="unit norm"):
            effective_channel(est, 2.0 * np.eye(3, dtype=complex)[:, :2],
                              np.ones(2), table_params)


class TestThresholds:
    def test_formulas(self, table_scenario, table_params):
        link = table_scenario.link(1)
        pair = link.pair
        th = outage_thresholds(link.eff_near, link.eff_far, pair, table_params)
        mu_f2 = abs(link.eff_far.mu[0]) ** 2
        mu_n2 = abs(link.eff_near.mu[0]) ** 2
        b2, bt2 = pair.beta_k2, pair.beta_kt2
        want_tau = (1 / (2 ** pair.R_kt - 1) - b2) * bt2 * mu_f2
        assert th.tau_kt_bar == pytest.approx(want_tau, rel=1e-12)
        assert th.theta_k_bar == pytest.approx(mu_n2 * b2 / (2 ** pair.R_k - 1))
        assert th.theta_kt_bar == pytest.approx(mu_n2 * bt2 / (2 ** pair.R_kt - 1))
        noise_f = (link.eff_far.sigma_u2
                   / (table_params.P * pair.d_kt ** -table_params.alpha))
        assert th.tau_kt == pytest.approx(want_tau - noise_f, rel=1e-12)
        assert th.tau_kt < th.tau_kt_bar


class TestFarOutage:
    def test_deterministic_success_limit(self):
        # no interference, no estimation error, rate below the asymptotic
        # bound: outage vanishes
        params = NetworkParams(lambda_b=0.0, sigma2=0.0, M=1, N=1, K=1)
        est = ChannelEstimate(np.array([[1.0 + 0j]]), np.eye(1, dtype=complex),
                              np.eye(1, dtype=complex), 0.0)
        pair = PairConfig(beta_k2=0.3, R_kt=0.5 * math.log2(1 + 0.7 / 0.3),
                          r_k=1, r_kt=2)
        eff = effective_channel(est, np.eye(1, dtype=complex), np.ones(1), params)
        p = far_outage_conditional(eff, pair, params)
        assert p.probability <= 1e-3

    def test_infeasible_rate_split_flag(self, table_scenario, table_params):
        link = table_scenario.link(1)
        pair = link.pair.with_rates(R_kt=3.0)  # beta^2 (2^R - 1) > 1
        res = far_outage_conditional(link.eff_far, pair, table_params)
        assert res.probability == 1.0
        assert res.flag == "infeasible_rate_split"

    def test_monotone_in_rate(self, table_scenario, table_params):
        link = table_scenario.link(1)
        vals = [far_outage_conditional(link.eff_far,
                                       link.pair.with_rates(R_kt=r),
                                       table_params).probability
                for r in np.linspace(0.25, 1.75, 7)]
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))

    def test_monotone_in_power_and_error(self, table_scenario, table_params):
        link = table_scenario.link(1)
        # more transmit power, lambda_b = 0: outage cannot grow
        p0 = replace(table_params, lambda_b=0.0)
        lo = far_outage_conditional(link.eff_far, link.pair, p0).probability
        hi = far_outage_conditional(link.eff_far, link.pair,
                                    replace(p0, P=p0.P / 100)).probability
        assert lo <= hi + 1e-9

    def test_point_mass_average_matches_conditional(self, table_scenario,
                                                    table_params):
        # collapsing the distance law to a point mass must reproduce the
        # conditional value (shift property of the Laplace transform)
        link = table_scenario.link(1)
        eff, pair = link.eff_far, link.pair
        th = outage_thresholds(eff, eff, pair, table_params)
        d = pair.d_kt
        alpha = table_params.alpha
        coeff_i = math.pi * table_params.lambda_b * eff.omega * d * d
        noise = eff.sigma_u2 / table_params.P * d ** alpha

        def phi_point(s):
            return np.exp(-noise * s - coeff_i * s ** (2 / alpha))

        nu = _scaled_vector(eff.mu, 0, pair.beta_k2)
        zeta2 = np.abs(eff.Psi.conj().T @ nu) ** 2
        q = invert_1d(_quadform_transform_1d(zeta2, eff.delta, phi_point),
                      th.tau_kt_bar, Inversion1DConfig())
        cond = far_outage_conditional(eff, pair, table_params).probability
        assert abs((1 - q) - cond) <= 1e-6


class TestNearOutage:
    def test_exact_below_approx(self, table_scenario, table_params):
        link = table_scenario.link(1)
        for r in (0.25, 0.75, 1.25):
            pair = link.pair.with_rates(R_k=2 * r, R_kt=r)
            exact = near_outage_conditional_exact(link.eff_near, pair,
                                                  table_params).probability
            approx = near_outage_conditional_approx(link.eff_near, pair,
                                                    table_params).probability
            assert exact <= approx + 2e-4

    def test_deterministic_success_limit(self):
        params = NetworkParams(lambda_b=0.0, sigma2=0.0, M=1, N=1, K=1)
        est = ChannelEstimate(np.array([[1.0 + 0j]]), np.eye(1, dtype=complex),
                              np.eye(1, dtype=complex), 1e-12)
        pair = PairConfig(beta_k2=0.3, R_k=1.0, R_kt=0.5, r_k=1, r_kt=2)
        eff = effective_channel(est, np.eye(1, dtype=complex), np.ones(1), params)
        p = near_outage_conditional_exact(eff, pair, params)
        assert p.probability <= 1e-3

    def test_nonpositive_threshold_returns_one(self, table_scenario,
                                               table_params):
        link = table_scenario.link(1)
        pair = link.pair.with_rates(R_k=30.0)  # drives theta_k negative
        res = near_outage_conditional_exact(link.eff_near, pair, table_params)
        assert res.probability == 1.0
        assert res.flag == "nonpositive_threshold"

    def test_single_pair_own_stage_chi_square(self, table_params, rng):
        # K = 1 with the own-message vector zeroed reduces to the CDF of a
        # single exponential |chi|^2; cross-check against the closed form
        params = NetworkParams(lambda_b=0.0, M=1, N=1, K=1,
                               sigma2=table_params.sigma2)
        est = ChannelEstimate(np.array([[1.2 + 0.5j]]), np.eye(1, dtype=complex),
                              np.eye(1, dtype=complex), 0.05)
        eff = effective_channel(est, np.eye(1, dtype=complex), np.ones(1), params)
        pair = PairConfig(R_k=1.0, R_kt=0.5, r_k=1, r_kt=2)
        th = outage_thresholds(eff, eff, pair, params)
        res = single_stream_outage_conditional(eff, pair.R_k, pair.d_k, params)
        theta = abs(eff.mu[0]) ** 2 / (2 ** pair.R_k - 1) - eff.sigma_u2 / (
            params.P * pair.d_k ** -params.alpha)
        want = math.exp(-theta / eff.delta[0])
        assert res.probability == pytest.approx(want, abs=1e-6)
        assert th.theta_k_bar > 0

    def test_monotone_in_error_variance(self, table_pair):
        # same realization, shrinking channel quality: outage cannot drop
        from nomacell import build_scenario
        params = NetworkParams(lambda_b=0.0)
        vals = []
        for k_db in (25.0, 15.0, 5.0):
            sc = build_scenario(params, table_pair, k_factor_db=k_db,
                                seed=20240717)
            link = sc.link(1)
            vals.append(near_outage_conditional_exact(
                link.eff_near, link.pair, params).probability)
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


class TestRandomizedInvariants:
    def test_invariants_over_random_configurations(self, rng):
        # randomized scenario sweep: probabilities stay clamped, raw values
        # stay within the inversion budget, and the exact joint outage never
        # exceeds the stage-independence approximation
        for trial in range(20):
            params = NetworkParams(
                lambda_b=float(rng.choice([0.0, 1e-6, 1e-5, 1e-4])),
                alpha=float(rng.uniform(2.5, 4.5)),
                M=3, N=2, K=2)
            H = sample_channel_matrix(2, 3, 6.0, rng)
            kappa = float(rng.uniform(0.0, 0.95))
            est = ChannelEstimate(H, exponential_covariance(3, kappa),
                                  exponential_covariance(2, kappa),
                                  float(10 ** rng.uniform(-4, -1)))
            V, _ = np.linalg.qr(rng.normal(size=(3, 2))
                                + 1j * rng.normal(size=(3, 2)))
            u = rng.normal(size=2) + 1j * rng.normal(size=2)
            eff = effective_channel(est, V, u, params)
            R_kt = float(rng.uniform(0.05, 1.2))
            pair = PairConfig(beta_k2=float(rng.uniform(0.1, 0.45)),
                              R_k=float(rng.uniform(0.05, 2.5)), R_kt=R_kt,
                              d_k=float(rng.uniform(20, 200)),
                              d_kt=float(rng.uniform(60, 400)),
                              r_k=1, r_kt=2)
            far = far_outage_conditional(eff, pair, params)
            exact = near_outage_conditional_exact(eff, pair, params)
            approx = near_outage_conditional_approx(eff, pair, params)
            for res in (far, exact, approx):
                assert 0.0 <= res.probability <= 1.0
                if res.flag is None:
                    assert -1e-4 <= res.raw <= 1.0 + 1e-4, \
                        f"raw outside budget in trial {trial}: {res}"
            assert exact.probability <= approx.probability + 2e-4


class TestAverageOutage:
    def test_interference_limited_lambda_free(self, table_pair):
        # with sigma2 = 0 the averaged outage is independent of the BS
        # intensity for both users and both policies
        from nomacell import build_scenario
        for policy in (GroupingPolicy("random"), GroupingPolicy("distance")):
            vals_f, vals_n = [], []
            for lam in (1e-5, 1e-3):
                params = NetworkParams(sigma2=0.0, lambda_b=lam)
                sc = build_scenario(params, table_pair, seed=20240717,
                                    policy=policy)
                link = sc.link(1)
                vals_f.append(far_outage_average(link.eff_far, link.pair,
                                                 params, policy).probability)
                vals_n.append(near_outage_average(link.eff_near, link.pair,
                                                  params, policy).probability)
            assert vals_f[0] == pytest.approx(vals_f[1], rel=1e-6)
            assert vals_n[0] == pytest.approx(vals_n[1], rel=1e-6)

    def test_far_average_matches_conditional_quadrature(self, table_params,
                                                        table_pair):
        # independent oracle: integrate the conditional outage against the
        # policy's distance density
        from scipy.integrate import quad
        from nomacell import build_scenario, ordered_distance_pdf
        policy = GroupingPolicy("random")
        sc = build_scenario(table_params, table_pair, seed=20240717,
                            policy=policy)
        link = sc.link(1)
        avg = far_outage_average(link.eff_far, link.pair, table_params,
                                 policy).probability

        def p_cond(d):
            pair_d = PairConfig(link.pair.beta_k2, link.pair.R_k, link.pair.R_kt,
                                link.pair.d_k, d, 1, 2)
            return far_outage_conditional(link.eff_far, pair_d,
                                          table_params).probability

        want, err = quad(lambda d: p_cond(d)
                         * ordered_distance_pdf(d, 2, 2, table_params),
                         1.0, 2500.0, limit=200)
        assert abs(avg - want) <= 5e-6 + 10 * err
