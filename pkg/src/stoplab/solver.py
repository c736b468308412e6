"""Optimal stopping thresholds and win probabilities.

Everything is in percentile space (values pushed through their CDF, so
``F(x) = x`` on ``[0, 1]``). Periods count boxes *remaining*: ``t = T`` while
deciding on the first box, ``t = 1`` on the last.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

ROOT_TOL = 1e-10
BRACKET = (1e-12, 1.0 - 1e-12)
DEFAULT_GRID = 10_001
GRID_CAP = 160_001


def bisect(fn, lo: float, hi: float, tol: float = ROOT_TOL, max_iter: int = 200) -> float:
    """Root of a continuous ``fn`` with a sign change on ``[lo, hi]``."""
    f_lo, f_hi = fn(lo), fn(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise ValueError("root is not bracketed")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if f_mid == 0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def _indifference(z: float, t: int) -> float:
    # sum_{i=1}^{t-1} (z^-i - 1)/i - 1, strictly decreasing on (0, 1)
    i = np.arange(1, t)
    return float(np.sum((z ** -i.astype(float) - 1.0) / i)) - 1.0


def solve_critical_value(t: int, tol: float = ROOT_TOL) -> float:
    """Percentile threshold ``z_t`` with ``t`` boxes left (``z_1 = 0``)."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if t == 1:
        return 0.0
    return bisect(lambda z: _indifference(z, t), *BRACKET, tol=tol)


def critical_values(t_max: int) -> np.ndarray:
    return np.array([solve_critical_value(t) for t in range(1, t_max + 1)])


def win_prob_accept_all(t: int, h):
    """Win probability with ``t`` boxes left when any new maximum above ``h`` is taken.

    ``sum_{j=1}^{t} (h^(j-1) - h^t) / (t + 1 - j)``.
    """
    h = np.asarray(h, dtype=float)
    j = np.arange(1, t + 1).reshape((-1,) + (1,) * h.ndim)
    return np.sum((h ** (j - 1) - h ** t) / (t + 1 - j), axis=0)


def critical_value_residual(t: int, z: float | None = None) -> float:
    """``z^(t-1) - win_prob_accept_all(t-1, z)``; zero at the true threshold.

    Accepting a value at the threshold wins with probability ``z^(t-1)``;
    rejecting it and carrying it forward as the history wins with
    probability ``win_prob_accept_all(t-1, z)``.
    """
    if t < 2:
        raise ValueError("t must be >= 2")
    if z is None:
        z = solve_critical_value(t)
    return float(z ** (t - 1) - win_prob_accept_all(t - 1, z))


@dataclass(frozen=True)
class WinProbabilityGrid:
    """``p[t-1, k]`` is the win probability with ``t`` boxes left and history ``h[k]``."""

    h: np.ndarray
    p: np.ndarray
    z: np.ndarray
    converged: bool = True
    max_change: float = 0.0

    def at(self, t: int, h):
        return np.interp(h, self.h, self.p[t - 1])

    @property
    def p0(self) -> np.ndarray:
        return self.p[:, 0].copy()


def _grid(size: int, z: np.ndarray) -> np.ndarray:
    return np.unique(np.concatenate([np.linspace(0.0, 1.0, size), z]))


def _recurse(h: np.ndarray, z: np.ndarray) -> np.ndarray:
    T = len(z)
    p = np.empty((T, h.size))
    p[0] = 1.0 - h
    dh = np.diff(h)
    for t in range(2, T + 1):
        prev = p[t - 2]
        cum = np.concatenate([[0.0], np.cumsum(0.5 * dh * (prev[1:] + prev[:-1]))])
        zt = z[t - 1]
        k = np.searchsorted(h, zt)
        below = (1.0 - zt ** t) / t + (cum[k] - cum) + h * prev
        p[t - 1] = np.where(h >= zt, win_prob_accept_all(t, h), below)
    return p


def win_probability_grid(T: int, grid_size: int = DEFAULT_GRID, tol: float = 1e-7,
                         cap: int = GRID_CAP) -> WinProbabilityGrid:
    """Win probabilities ``p_t(h)`` for ``t = 1..T`` by backward recursion.

    Below the threshold the recursion integrates ``p_{t-1}`` with the
    trapezoid rule on a grid that contains every threshold as a node. The
    grid is refined until ``p_t(0)`` moves by less than ``tol``; if the cap
    is hit first the result is flagged and a warning is emitted.
    """
    if grid_size < 1001:
        raise ValueError("grid_size must be >= 1001")
    if T < 1:
        raise ValueError("T must be >= 1")
    z = critical_values(T)
    h = _grid(grid_size, z)
    p = _recurse(h, z)
    size, change = grid_size, np.inf
    while size < cap:
        size = 2 * size - 1
        h2 = _grid(size, z)
        p2 = _recurse(h2, z)
        change = float(np.max(np.abs(p2[:, 0] - p[:, 0])))
        h, p = h2, p2
        if change < tol:
            return WinProbabilityGrid(h, p, z, True, change)
    warnings.warn(f"win probability grid not converged (change {change:.2e})")
    return WinProbabilityGrid(h, p, z, False, change)


@dataclass(frozen=True)
class CriticalValueTable:
    horizon_max: int
    z: tuple
    p0: tuple

    def critical_value(self, t: int) -> float:
        return self.z[t - 1]

    def thresholds_by_box(self, T: int) -> np.ndarray:
        """Threshold for box ``i = 1..T-1``: ``z_{T-i+1}``."""
        if T > self.horizon_max:
            raise ValueError(f"table covers T <= {self.horizon_max}")
        return np.array([self.z[T - i] for i in range(1, T)])

    def dollar_thresholds(self, spec) -> np.ndarray:
        return spec.quantile(np.array(self.z))

    def rows(self):
        return [(t, self.z[t - 1], self.p0[t - 1]) for t in range(1, self.horizon_max + 1)]


def critical_value_table(t_max: int = 15, grid_size: int = DEFAULT_GRID) -> CriticalValueTable:
    grid = win_probability_grid(t_max, grid_size)
    return CriticalValueTable(t_max, tuple(float(v) for v in grid.z),
                              tuple(float(v) for v in grid.p0))


# -- classical (unknown distribution) problem ---------------------------------

def classical_win_prob(k: int, T: int, exact: bool = False):
    """Win probability of "observe ``k``, then take the next best-so-far" with ``T`` boxes.

    ``(k/T) * sum_{m=k+1}^{T} 1/(m-1)``, evaluated in rationals.
    """
    if not 1 <= k < T:
        raise ValueError(f"need 1 <= k < T, got k={k}, T={T}")
    val = Fraction(k, T) * sum(Fraction(1, m - 1) for m in range(k + 1, T + 1))
    return val if exact else float(val)


def optimal_classical(T: int) -> tuple[int, float]:
    """Best sample size and its win probability; ties go to the smaller k."""
    if T < 2:
        raise ValueError("T must be >= 2")
    best_k, best = 1, classical_win_prob(1, T, exact=True)
    for k in range(2, T):
        v = classical_win_prob(k, T, exact=True)
        if v > best:
            best_k, best = k, v
    return best_k, float(best)


@dataclass(frozen=True)
class ClassicalTable:
    horizon_max: int
    best_k: tuple
    win_prob: tuple

    def rows(self):
        return [(T, self.best_k[T - 1], self.win_prob[T - 1])
                for T in range(1, self.horizon_max + 1)]


def classical_table(t_max: int = 15) -> ClassicalTable:
    # T = 1: the only box is accepted (k = 0 boxes observed)
    ks, ps = [0], [1.0]
    for T in range(2, t_max + 1):
        k, p = optimal_classical(T)
        ks.append(k)
        ps.append(p)
    return ClassicalTable(t_max, tuple(ks), tuple(ps))
