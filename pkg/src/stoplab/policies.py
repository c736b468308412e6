"""Stopping policies ``f(i, i*, q) -> P(stop)`` and the percentile memory.

``i`` is the 1-based box position, ``i*`` the number of non-dominated boxes
seen so far in the game (including the current one) and ``q`` the current
box's estimated percentile. Policies are only consulted on non-dominated
boxes ``1..T-1``; the last box is always accepted.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

MODELS = ("value_oblivious", "viable_k", "sample_k", "multiple_threshold",
          "single_threshold", "two_threshold", "two_threshold_boundary", "lp_agent")
THRESHOLD_MODELS = ("multiple_threshold", "single_threshold", "two_threshold",
                    "two_threshold_boundary")
STEP_SLOPE = 1e4


class PercentileMemory:
    """Sorted multiset of every value a player has observed."""

    def __init__(self, values=()):
        self._values = sorted(float(v) for v in values)

    def __len__(self):
        return len(self._values)

    def insert(self, x: float) -> None:
        bisect.insort(self._values, float(x))

    def counts(self, x: float) -> tuple[int, int, int]:
        """``(N, N_<, N_=)`` for the query value ``x``."""
        lo = bisect.bisect_left(self._values, x)
        hi = bisect.bisect_right(self._values, x)
        return len(self._values), lo, hi - lo

    @property
    def values(self) -> tuple:
        return tuple(self._values)


def percentile_rank(memory: PercentileMemory, x: float) -> float:
    """``(N_< + 0.5 N_=) / N`` over ``memory``, which should already contain ``x``."""
    n, less, equal = memory.counts(x)
    if n == 0:
        raise ValueError("percentile of an empty memory")
    return (less + 0.5 * equal) / n


@dataclass(frozen=True)
class PolicyParams:
    """Parameters of one stopping model for horizon ``horizon``.

    Only the fields the model uses are set: ``p`` (value_oblivious);
    ``k`` and ``eps`` (viable_k, sample_k); ``tau`` and ``lam`` (threshold
    models, with ``tau`` of length T-1, 1 or 2); ``boundary`` (last early
    box for two_threshold_boundary); ``tau`` holds the step thresholds
    of lp_agent.
    """

    model: str
    horizon: int
    p: tuple | None = None
    k: int | None = None
    eps: float | None = None
    tau: tuple | None = None
    lam: float | None = None
    boundary: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        T = self.horizon
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if T < 2:
            raise ValueError("horizon must be >= 2")
        for name in ("p", "tau"):
            v = getattr(self, name)
            if v is not None:
                v = tuple(float(x) for x in np.atleast_1d(v))
                object.__setattr__(self, name, v)
        m = self.model
        if m == "value_oblivious":
            _need(self.p is not None and len(self.p) == T - 1, "p needs T-1 entries")
            _need(all(0 <= x <= 1 for x in self.p), "p outside [0, 1]")
        elif m in ("viable_k", "sample_k"):
            _need(self.k is not None and 1 <= self.k <= T - 1, "k outside 1..T-1")
            _need(self.eps is not None and 0 <= self.eps <= 0.5, "eps outside [0, 0.5]")
            object.__setattr__(self, "k", int(self.k))
        else:
            n_tau = {"multiple_threshold": T - 1, "single_threshold": 1,
                     "two_threshold": 2, "two_threshold_boundary": 2,
                     "lp_agent": T - 1}[m]
            _need(self.tau is not None and len(self.tau) == n_tau,
                  f"{m} needs {n_tau} thresholds")
            _need(all(0 <= x <= 1 for x in self.tau), "thresholds outside [0, 1]")
            if m != "lp_agent":
                _need(self.lam is not None and self.lam > 0, "lambda must be positive")
            if m == "two_threshold_boundary":
                _need(self.boundary is not None and 1 <= self.boundary <= T - 1,
                      "boundary outside 1..T-1")

    def stop_probability(self, i, i_star, q):
        return stop_probability(self, i, i_star, q)

    def to_dict(self) -> dict:
        d = {"model": self.model, "horizon": self.horizon}
        for name in ("p", "k", "eps", "tau", "lam", "boundary"):
            v = getattr(self, name)
            if v is not None:
                d[name] = list(v) if isinstance(v, tuple) else v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyParams":
        known = {"model", "horizon", "p", "k", "eps", "tau", "lam", "boundary"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown policy fields: {sorted(extra)}")
        if "model" not in d or "horizon" not in d:
            raise ValueError("policy needs 'model' and 'horizon'")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _need(cond, msg):
    if not cond:
        raise ValueError(msg)


def _check_inputs(T, i, i_star, q):
    if np.any(i < 1) or np.any(i > T - 1):
        raise ValueError("box index outside 1..T-1")
    if np.any(i_star < 1) or np.any(i_star > i):
        raise ValueError("non-dominated count outside 1..i")
    if np.any(q < 0) or np.any(q > 1) or np.any(np.isnan(q)):
        raise ValueError("percentile outside [0, 1]")


def threshold_for(params: PolicyParams, i):
    """Per-decision threshold ``tau`` used by a threshold-type model."""
    tau = np.asarray(params.tau)
    m = params.model
    if m in ("multiple_threshold", "lp_agent"):
        return tau[np.asarray(i) - 1]
    if m == "single_threshold":
        return np.full(np.shape(i), tau[0])
    if m == "two_threshold":
        return np.where(np.asarray(i) < params.horizon / 2, tau[0], tau[1])
    if m == "two_threshold_boundary":
        return np.where(np.asarray(i) <= params.boundary, tau[0], tau[1])
    raise ValueError(f"{m} has no thresholds")


def stop_logit(params: PolicyParams, i, q):
    """``lam * (q - tau)``; the stop probability is its logistic transform."""
    return params.lam * (np.asarray(q, dtype=float) - threshold_for(params, i))


def stop_probability(params: PolicyParams, i, i_star, q, check: bool = True):
    """Probability of stopping at a non-dominated box. Vectorised over inputs.

    Threshold models increase in ``q`` and equal 0.5 at their threshold.
    """
    scalar = np.ndim(i) == 0 and np.ndim(i_star) == 0 and np.ndim(q) == 0
    i = np.asarray(i, dtype=int)
    i_star = np.asarray(i_star, dtype=int)
    q = np.asarray(q, dtype=float)
    if check:
        _check_inputs(params.horizon, i, i_star, q)
    m = params.model
    if m == "value_oblivious":
        f = np.asarray(params.p)[i - 1]
    elif m == "viable_k":
        f = np.where(i_star < params.k, params.eps, 1.0 - params.eps)
    elif m == "sample_k":
        f = np.where(i < params.k, params.eps, 1.0 - params.eps)
    elif m == "lp_agent":
        f = (q > threshold_for(params, i)).astype(float)
    else:
        f = _sigmoid(stop_logit(params, i, q))
    f = np.broadcast_to(f, np.broadcast_shapes(i.shape, i_star.shape, q.shape))
    return float(f) if scalar else np.array(f, dtype=float)


def _sigmoid(s):
    # branch-free and overflow-safe
    return np.exp(-np.logaddexp(0.0, -s))


def lp_agent_params(table, T: int) -> PolicyParams:
    """The learn-percentiles agent: strict step at ``z_{T-i+1}`` on box ``i``."""
    return PolicyParams("lp_agent", T, tau=tuple(table.thresholds_by_box(T)))


def optimal_policy_from_table(table, T: int | None = None,
                              lam: float = STEP_SLOPE) -> PolicyParams:
    """Multiple-threshold parameters at the optimal thresholds with a steep slope."""
    T = table.horizon_max if T is None else T
    return PolicyParams("multiple_threshold", T, tau=tuple(table.thresholds_by_box(T)),
                        lam=lam)


def lp_agent_decide(memory: PercentileMemory, table, i: int, T: int,
                    is_dominated: bool, x: float) -> bool:
    """Stop decision of the learn-percentiles agent on box ``i``.

    ``x`` must already be in ``memory``; percentiles of earlier values are
    implicitly re-estimated by querying the updated memory.
    """
    if i == T:
        return True
    if is_dominated:
        return False
    return percentile_rank(memory, x) > table.critical_value(T - i + 1)


def classical_sample_k(T: int) -> PolicyParams:
    """Sample-k at ``k = ceil(T/e)`` with no errors."""
    return PolicyParams("sample_k", T, k=max(1, min(T - 1, math.ceil(T / math.e))), eps=0.0)


def constant_policy(T: int, p: float) -> PolicyParams:
    """Value-oblivious policy stopping with probability ``p`` at every box."""
    return PolicyParams("value_oblivious", T, p=(p,) * (T - 1))


def with_slope(params: PolicyParams, lam: float) -> PolicyParams:
    return replace(params, lam=lam)
