#!/usr/bin/env python
"""Can the inference pipeline tell stopping strategies apart?

Simulate decisions from a noisy version of the optimal threshold policy,
then compare six candidate models by cross-validated evidence and check the
recovered thresholds. Sampler settings are kept small so this runs in a few
minutes; the library defaults are much longer.
"""
import numpy as np

from stoplab.distributions import get_spec
from stoplab.engine import run_cohort
from stoplab.inference import (DEFAULT_MODELS, DecisionData, SamplerConfig, SplitSpec,
                               compare_models, estimate_thresholds)
from stoplab.policies import optimal_policy_from_table, with_slope
from stoplab.solver import critical_value_table

T = 7
table = critical_value_table(T)
truth = with_slope(optimal_policy_from_table(table, T), 50.0)
res = run_cohort(truth, get_spec("medium"), T, 4000, 1, seed=3, percentiles="exact")
data = DecisionData.from_log(res.log)
print(f"{len(data)} eligible decisions")

# %% Model comparison on held-out trajectories.
config = SamplerConfig(draws=1000, burn=300, seed=0)
report = compare_models(list(DEFAULT_MODELS), data, T, SplitSpec(0.2, 3, seed=0),
                        config=config)
for model in report.ranking(1):
    row = report.for_game(1)[model]
    print(f"{model:20s} log10 BF vs weakest {row['log10_bf_normalized']:8.1f}")

# %% Threshold recovery. A 95% interval misses its target about one time in
# twenty, so an occasional narrow miss is expected; across repeated datasets
# the coverage is close to nominal.
rows = estimate_thresholds(data, T, config=SamplerConfig(draws=2000, burn=500, seed=1))
for r in rows:
    inside = r["ci_lo"] <= r["optimal"] <= r["ci_hi"]
    print(f"box {r['box_index']}: {r['tau_mean']:.3f} [{r['ci_lo']:.3f}, {r['ci_hi']:.3f}]"
          f"  optimal {r['optimal']:.3f}  {'covered' if inside else 'missed'}")
print(f"slope: {rows[0]['lam_mean']:.1f} [{rows[0]['lam_ci_lo']:.1f}, {rows[0]['lam_ci_hi']:.1f}]"
      f" (generated with 50)")
