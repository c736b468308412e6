#!/usr/bin/env python
"""Stopping curves: stop rate against the distance to the optimal threshold.

The learning agent applies the optimal thresholds to its own percentile
estimates, so against those estimates its curve is an exact step. Against
the true percentiles the step is smeared in early games, because estimates
from a handful of observations are noisy, and it sharpens with practice.
"""
from stoplab.analysis import stopping_curve
from stoplab.distributions import get_spec
from stoplab.engine import DecisionLog, run_cohort
from stoplab.policies import lp_agent_params
from stoplab.solver import critical_value_table

T = 7
spec = get_spec("medium")
table = critical_value_table(T)
res = run_cohort(lp_agent_params(table, T), spec, T, 5000, 10, seed=4)

# %% The same decisions, re-expressed with the true percentile of each value.
cols = {c: getattr(res.log, c) for c in res.log.columns}
cols["percentile"] = spec.cdf(res.log.box_value)
true_log = DecisionLog(**cols)


def show(log, band, title):
    curve = stopping_curve(log, table, T, bin_width=0.1, game_band=band)
    print(f"\n{title}, {curve.group}")
    for lo, n, r in zip(curve.edges[:-1], curve.counts, curve.rates):
        if n and -0.4 <= lo < 0.3:
            print(f"  [{lo:+.1f}, {lo + 0.1:+.1f})  n={n:6d}  stop {r:.3f}  " + "#" * int(40 * r))


show(res.log, (1, 1), "learned percentiles")
show(true_log, (1, 1), "true percentiles")
show(true_log, (5, None), "true percentiles")

# %% One-number summary: stop rate on the wrong side of the threshold.
for band in ((1, 1), (5, None)):
    c = stopping_curve(true_log, table, T, bin_width=1.0, game_band=band)
    print(f"{c.group}: stop below threshold {c.rates[0]:.3f}, "
          f"continue above threshold {1 - c.rates[1]:.3f}")
