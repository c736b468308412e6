#!/usr/bin/env python
"""How much is knowing the value distribution worth, and how fast can it be learned?

Walks from the exact solution of the known-distribution problem to a
simulated agent that only knows the percentile thresholds and has to learn
percentiles from the values it sees.
"""
import numpy as np

from stoplab.analysis import learning_curves
from stoplab.distributions import get_spec
from stoplab.engine import run_cohort
from stoplab.policies import lp_agent_params
from stoplab.solver import classical_table, critical_value_table

# %% Thresholds and win probabilities when the distribution is known.
# With t boxes left, stop on a running maximum whose percentile beats z_t.
table = critical_value_table(15)
classical = classical_table(15)
print(" t     z_t   p_t(0)  classical")
for (t, z, p0), (_, k, pc) in zip(table.rows(), classical.rows()):
    print(f"{t:2d}  {z:.4f}   {p0:.4f}     {pc:.4f}  (sample {k})")

# %% The gap between the two columns is the value of knowing the distribution.
for T in (7, 15):
    print(f"T={T}: known {table.p0[T - 1]:.3f} vs classical {classical.win_prob[T - 1]:.3f}")

# %% An agent that knows the thresholds but must learn percentiles.
# Its first game is played with almost no information, and every game adds T
# more observations to its percentile memory.
spec = get_spec("medium")
T = 7
res = run_cohort(lp_agent_params(table, T), spec, T, n_players=20_000,
                 games_per_player=10, seed=1)
print("\ngame  win    early  late   depth")
for row in learning_curves(res.outcomes):
    print(f"{row['game_number']:4d}  {row['win_rate']:.3f}  {row['early_rate']:.3f}  "
          f"{row['late_rate']:.3f}  {row['mean_depth']:.2f}")

# %% The same agent with exact percentiles recovers p_T(0).
exact = run_cohort(lp_agent_params(table, T), spec, T, 2000, 50, seed=2, percentiles="exact")
print(f"\nexact percentiles: win rate {np.mean(exact.outcomes.won):.3f} "
      f"(theory {table.p0[T - 1]:.3f})")
