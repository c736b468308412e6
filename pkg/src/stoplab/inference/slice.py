"""Univariate slice sampling with stepping out and shrinkage.

Uses Neal's stepping-out procedure, capped at ``m`` steps, followed by
shrinkage towards the current point.
"""
from __future__ import annotations

import math

import numpy as np


class SliceError(RuntimeError):
    pass


def slice_step(x0: float, logp, width: float, rng: np.random.Generator,
               logp0: float | None = None, max_steps: int = 32,
               lower: float = -np.inf, upper: float = np.inf):
    """One slice-sampling update of a scalar.

    Returns ``(x1, logp(x1), n_evals)``. ``logp`` may return ``-inf`` outside
    the support; the interval is additionally clipped to ``[lower, upper]``.
    """
    if logp0 is None:
        logp0 = logp(x0)
    if not math.isfinite(logp0):
        raise SliceError(f"current point has log density {logp0}")
    log_y = logp0 - rng.standard_exponential()
    evals = 0

    left = x0 - width * rng.random()
    right = left + width
    j = math.floor(max_steps * rng.random())
    k = max_steps - 1 - j
    while j > 0 and left > lower:
        evals += 1
        if logp(left) <= log_y:
            break
        left -= width
        j -= 1
    while k > 0 and right < upper:
        evals += 1
        if logp(right) <= log_y:
            break
        right += width
        k -= 1
    left, right = max(left, lower), min(right, upper)

    for _ in range(200):
        x1 = left + (right - left) * rng.random()
        lp1 = logp(x1)
        evals += 1
        if lp1 > log_y:
            return x1, lp1, evals
        if x1 < x0:
            left = x1
        else:
            right = x1
    raise SliceError("shrinkage did not terminate")


def sample_categorical_log(logw: np.ndarray, rng: np.random.Generator) -> int:
    """Index drawn with probability proportional to ``exp(logw)``."""
    logw = np.asarray(logw, dtype=float)
    m = np.max(logw)
    if not math.isfinite(m):
        raise SliceError("all categories have zero probability")
    w = np.exp(logw - m)
    c = np.cumsum(w)
    return int(np.searchsorted(c, rng.random() * c[-1], side="right"))


def slice_chain(logp, x0: float, n: int, width: float = 1.0, seed=None, **kw) -> np.ndarray:
    """Convenience: ``n`` successive slice updates of a scalar density."""
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    x, lp = float(x0), None
    for t in range(n):
        x, lp, _ = slice_step(x, logp, width, rng, lp, **kw)
        out[t] = x
    return out
