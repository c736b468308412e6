import math
from fractions import Fraction
from functools import lru_cache
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, optimize

from stoplab.solver import (bisect, classical_table, classical_win_prob, critical_value_residual,
                            critical_values, optimal_classical, solve_critical_value,
                            win_prob_accept_all, win_probability_grid)


def test_bisect_finds_root_and_rejects_bad_bracket():
    assert bisect(lambda x: x * x - 2, 0, 2) == pytest.approx(math.sqrt(2), abs=1e-10)
    with pytest.raises(ValueError):
        bisect(lambda x: x * x + 1, 0, 2)


def test_small_critical_values_closed_form():
    assert solve_critical_value(1) == 0.0
    assert solve_critical_value(2) == pytest.approx(0.5, abs=1e-10)
    # t = 3: 1 = (1/z - 1) + (1/z^2 - 1)/2  ->  3z^2 - 2z - 1 = 0 has z = ... solve directly
    z3 = optimize.brentq(lambda z: (1 / z - 1) + (z ** -2 - 1) / 2 - 1, 0.1, 0.99)
    assert solve_critical_value(3) == pytest.approx(z3, abs=1e-9)


def test_critical_values_match_brentq_oracle():
    for t in range(2, 16):
        f = lambda z: sum((z ** -i - 1) / i for i in range(1, t)) - 1
        assert solve_critical_value(t) == pytest.approx(optimize.brentq(f, 1e-6, 1 - 1e-12,
                                                                        xtol=1e-14), abs=1e-9)


def test_critical_values_increase():
    z = critical_values(15)
    assert np.all(np.diff(z) > 0) and z[-1] < 1


def test_indifference_identity():
    for t in range(2, 16):
        assert abs(critical_value_residual(t)) < 1e-8


def test_accept_all_matches_monte_carlo():
    rng = np.random.default_rng(5)
    t, h, n = 4, 0.6, 200_000
    x = rng.random((n, t))
    above = x > h
    running = np.maximum.accumulate(np.c_[np.full(n, h), x], axis=1)[:, :-1]
    take = above & (x > running)
    first = np.where(take.any(axis=1), take.argmax(axis=1), -1)
    best = x.max(axis=1)
    won = (first >= 0) & (x[np.arange(n), np.maximum(first, 0)] == best) & (best > h)
    assert win_prob_accept_all(t, h) == pytest.approx(won.mean(), abs=4 * math.sqrt(0.25 / n))


@lru_cache(maxsize=None)
def _p_oracle(t, h):
    """Win probability by direct dynamic programming with adaptive quadrature."""
    if t == 1:
        return 1.0 - h

    def integrand(x):
        return max(x ** (t - 1), _p_oracle(t - 1, x))

    val, _ = integrate.quad(integrand, h, 1.0, limit=200, epsabs=1e-11)
    return h * _p_oracle(t - 1, h) + val


def test_win_probability_grid_matches_quadrature_oracle():
    grid = win_probability_grid(4)
    for t in range(1, 5):
        assert grid.p0[t - 1] == pytest.approx(_p_oracle(t, 0.0), abs=1e-6)
    for h in (0.3, 0.7, 0.9):
        assert grid.at(3, h) == pytest.approx(_p_oracle(3, h), abs=1e-5)


def test_grid_rejects_coarse_grids():
    with pytest.raises(ValueError):
        win_probability_grid(5, grid_size=100)


def test_grid_warns_when_cap_is_hit():
    with pytest.warns(UserWarning, match="not converged"):
        g = win_probability_grid(6, grid_size=1001, tol=1e-16, cap=4001)
    assert not g.converged


def _classical_by_enumeration(k, T):
    wins = total = 0
    for perm in permutations(range(T)):
        total += 1
        bench = max(perm[:k]) if k else -1
        chosen = next((v for v in perm[k:] if v > bench), perm[-1])
        wins += chosen == T - 1
    return Fraction(wins, total)


@pytest.mark.parametrize("T", range(2, 8))
def test_classical_formula_matches_permutation_enumeration(T):
    for k in range(1, T):
        assert classical_win_prob(k, T, exact=True) == _classical_by_enumeration(k, T)


def test_classical_optimum_is_best_k():
    for T in range(2, 16):
        k, p = optimal_classical(T)
        assert p == max(float(classical_win_prob(j, T)) for j in range(1, T))
        assert classical_win_prob(k, T) == pytest.approx(p)


def test_classical_table_first_row():
    rows = classical_table(3).rows()
    assert rows[0] == (1, 0, 1.0)
    assert rows[1][2] == pytest.approx(0.5)


@given(st.integers(2, 40))
def test_classical_between_one_over_e_and_known_distribution(table, T):
    p = optimal_classical(T)[1]
    assert 1 / math.e < p <= 0.5 + 1e-12
    if T <= 15:
        assert p < table.p0[T - 1]
