"""Rate thresholds, the outage cliff, and goodput maximization.

Without inter-cell interference the conditional outage collapses to a step
around a per-realization rate threshold as the channel quality improves;
the goodput optimizer then picks rates against an outage budget and is
compared with the orthogonal-access baselines.
"""
from nomacell import (NetworkParams, PairConfig, baseline_goodput,
                      build_scenario, far_outage_conditional, maximize_goodput,
                      optimize_chernoff_far, rate_thresholds)

free = NetworkParams(lambda_b=0.0)
sc = build_scenario(free, PairConfig(), k_factor_db=50.0, seed=20240717)
link = sc.link(1)
th = rate_thresholds(link.eff_far, link.eff_near, link.pair, free)
print(f"far rate threshold for this realization: {th.R_kt_max_far:.4f} bps/Hz")

print("\noutage across the threshold as quality improves")
for fac in (0.95, 1.05):
    rate = fac * th.R_kt_max_far
    row = []
    for kdb in (20, 35, 50):
        l = build_scenario(free, PairConfig(), k_factor_db=kdb,
                           seed=20240717).link(1)
        p = far_outage_conditional(l.eff_far, l.pair.with_rates(R_kt=rate),
                                   free).probability
        row.append(f"{p:.2e}")
    print(f"  {fac:.2f} x threshold: {row} over 20/35/50 dB")

link20 = build_scenario(free, PairConfig(), k_factor_db=20.0,
                        seed=20240717).link(1)
pair = link20.pair.with_rates(R_k=3.2, R_kt=1.6)
bound, s_star = optimize_chernoff_far(link20.eff_far, pair, free)
exact = far_outage_conditional(link20.eff_far, pair, free).probability
print(f"\noptimized Chernoff bound {bound:.3e} vs exact {exact:.3e} at 20 dB")

print("\ngoodput maximization at 1% outage budget (with interference)")
params = NetworkParams()
aligned = build_scenario(params, PairConfig(), k_factor_db=20.0, seed=20240717)
plain = build_scenario(params, PairConfig(), k_factor_db=20.0, seed=20240717,
                       scheme="plain")
sol = maximize_goodput(aligned.link(1), 1e-2, params)
print(f"  proposed     : {sol.goodput:.4f} bps/Hz at rates "
      f"({sol.R_k:.3f}, {sol.R_kt:.3f})")
for name, link_, scheme in (("oma precoded", aligned.link(1), "oma"),
                            ("oma plain", plain.link(1), "oma"),
                            ("noma plain", plain.link(1), "noma")):
    base = baseline_goodput(scheme, link_, 1e-2, params)
    print(f"  {name:13s}: {base.goodput:.4f} bps/Hz")
