import numpy as np
import pytest

from stoplab.analysis import (BinnedCurve, critical_gap, first_game_conditions,
                              learning_curves, stopping_curve, stopping_curves, write_rows)
from stoplab.distributions import get_spec
from stoplab.engine import DecisionLog, OutcomeTable, run_cohort
from stoplab.policies import PolicyParams, lp_agent_params

T = 5


@pytest.fixture(scope="module")
def cohort(table):
    policy = PolicyParams("multiple_threshold", T, tau=np.linspace(0.3, 0.7, T - 1), lam=15.0)
    return run_cohort(policy, get_spec("medium"), T, 400, 6, seed=21)


def test_learning_curve_rates_partition(cohort):
    rows = learning_curves(cohort.outcomes)
    assert [r["game_number"] for r in rows] == list(range(1, 7))
    for r in rows:
        assert r["players"] == 400
        assert r["win_rate"] + r["early_rate"] + r["late_rate"] == pytest.approx(1.0)
        assert r["win_se"] == pytest.approx(np.sqrt(r["win_rate"] * (1 - r["win_rate"]) / 400))
        assert 1 <= r["mean_depth"] <= T


def test_learning_curve_hand_example():
    out = OutcomeTable(player_id=[0, 1, 2, 0], game_number=[1, 1, 1, 2],
                       won=[True, False, False, True],
                       error_type=["none", "stopped_before_max", "stopped_after_max", "none"],
                       stop_index=[2, 1, 4, 3], max_index=[2, 3, 2, 3], depth=[2, 1, 4, 3])
    g1, g2 = learning_curves(out)
    assert (g1["win_rate"], g1["early_rate"], g1["late_rate"]) == pytest.approx((1 / 3,) * 3)
    assert g1["mean_depth"] == pytest.approx(7 / 3)
    assert g2["players"] == 1 and np.isnan(g2["depth_se"])
    # only player 0 played two games
    assert [r["players"] for r in learning_curves(out, min_games=2)] == [1, 1]
    with pytest.raises(ValueError):
        learning_curves(OutcomeTable())


def test_critical_gap_uses_boxes_left(table):
    log = DecisionLog(player_id=[0, 0], game_number=[1, 1], box_index=[1, 4],
                      nondominated_count=[1, 2], box_value=[1.0, 2.0], percentile=[0.9, 0.6],
                      stopped=[0, 1], forced=[False, False])
    gap = critical_gap(log, table, T)
    assert gap == pytest.approx([0.9 - table.critical_value(5), 0.6 - table.critical_value(2)])


def test_stopping_curve_counts_only_eligible_decisions(cohort, table):
    curve = stopping_curve(cohort.log, table, T)
    assert curve.counts.sum() == (~cohort.log.forced).sum()
    assert curve.stops.sum() == cohort.log.stopped[~cohort.log.forced].sum()
    assert curve.edges[0] == -1 and curve.edges[-1] == 1 and curve.counts.size == 40
    rates = curve.rates[curve.counts > 50]
    assert np.all((rates >= 0) & (rates <= 1))


def test_stopping_curve_bands_split_the_data(cohort, table):
    rows = stopping_curves(cohort.log, table, T)
    total = sum(r["count"] for r in rows)
    assert total == (~cohort.log.forced).sum()
    assert {r["group"] for r in rows} == {"game_1", "games_2-4", "games_5+"}


def test_lp_agent_curve_is_a_step(table):
    res = run_cohort(lp_agent_params(table, T), get_spec("medium"), T, 300, 4, seed=5,
                     percentiles="exact")
    curve = stopping_curve(res.log, table, T, bin_width=0.1)
    r = curve.rates
    left, right = curve.edges[:-1], curve.edges[1:]
    assert np.all(r[(right <= 0) & (curve.counts > 0)] == 0)
    assert np.all(r[(left >= 0) & (curve.counts > 0)] == 1)


def test_first_game_conditions(cohort, table):
    flags = first_game_conditions(cohort.log, cohort.outcomes, table, T)
    assert len(flags) == 400
    won = [f["won"] for f in flags.values()]
    assert sum(won) == cohort.outcomes.won[cohort.outcomes.game_number == 1].sum()
    curve = stopping_curve(cohort.log, table, T, condition={"won": True},
                           outcomes=cohort.outcomes)
    assert curve.counts.sum() > 0
    with pytest.raises(ValueError):
        stopping_curve(cohort.log, table, T, condition={"won": True})


def test_invalid_bin_width(cohort, table):
    with pytest.raises(ValueError):
        stopping_curve(cohort.log, table, T, bin_width=0)


def test_binned_curve_empty_bins():
    c = BinnedCurve(np.array([-1.0, 0.0, 1.0]), np.array([0, 4]), np.array([0.0, 1.0]))
    rows = c.rows()
    assert np.isnan(rows[0]["stop_rate"]) and rows[1]["stop_rate"] == 0.25


def test_write_rows(tmp_path):
    path = tmp_path / "x.csv"
    write_rows([{"a": 1, "b": 0.1, "c": True}], path, ("a", "b", "c"))
    assert path.read_text() == "a,b,c\n1,0.1,1\n"
    with pytest.raises(ValueError):
        write_rows([{"a": 1}], path, ("a", "b"))
