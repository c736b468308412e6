"""Summaries of decision logs and game outcomes.

All outputs are tidy tables (lists of dicts) meant to be written as CSV.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

DEFAULT_BANDS = ((1, 1), (2, 4), (5, None))
DEFAULT_BIN_WIDTH = 0.05


def _se(rate, n):
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.sqrt(rate * (1 - rate) / n)


def _games_per_player(outcomes):
    players, counts = np.unique(outcomes.player_id, return_counts=True)
    return dict(zip(players.tolist(), counts.tolist()))


def learning_curves(outcomes, min_games: int = 0) -> list[dict]:
    """Win / early-stop / late-stop rates and search depth per game number.

    ``min_games`` keeps only players with at least that many games, to
    check that improvements are not a selection effect.
    """
    if len(outcomes) == 0:
        raise ValueError("no outcomes")
    if min_games > 0:
        per = _games_per_player(outcomes)
        keep = np.array([per[p] >= min_games for p in outcomes.player_id.tolist()])
        outcomes = outcomes.subset(keep)
    rows = []
    for g in np.unique(outcomes.game_number):
        sel = outcomes.game_number == g
        n = int(sel.sum())
        err = outcomes.error_type[sel]
        win = float(np.mean(outcomes.won[sel]))
        early = float(np.mean(err == "stopped_before_max"))
        late = float(np.mean(err == "stopped_after_max"))
        depth = outcomes.depth[sel].astype(float)
        rows.append({
            "game_number": int(g), "players": n,
            "win_rate": win, "win_se": float(_se(win, n)),
            "early_rate": early, "early_se": float(_se(early, n)),
            "late_rate": late, "late_se": float(_se(late, n)),
            "mean_depth": float(depth.mean()),
            "depth_se": float(depth.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan"),
        })
    return rows


@dataclass(frozen=True)
class BinnedCurve:
    """Stop rates of eligible decisions binned by ``q - z_t`` on ``[-1, 1]``."""

    edges: np.ndarray
    counts: np.ndarray
    stops: np.ndarray
    group: str = "all"

    @property
    def rates(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.stops / self.counts

    @property
    def se(self):
        return _se(self.rates, self.counts)

    def rows(self) -> list[dict]:
        out = []
        for b in range(self.counts.size):
            n = int(self.counts[b])
            out.append({"group": self.group, "bin_lo": float(self.edges[b]),
                        "bin_hi": float(self.edges[b + 1]), "count": n,
                        "stop_rate": float(self.rates[b]) if n else float("nan"),
                        "se": float(self.se[b]) if n else float("nan")})
        return out


def critical_gap(log, table, T: int) -> np.ndarray:
    """``q_i - z_{T-i+1}`` for each record of ``log``."""
    z = np.asarray(table.z)
    return log.percentile - z[T - log.box_index]


def first_game_conditions(log, outcomes, table, T: int) -> dict:
    """Per-player flags describing the first game.

    A first game is over-searched if the player continued past any value
    above its critical value, and under-searched if the (unforced) stop
    came below the critical value. Both flags may be set.
    """
    g1 = log.subset(log.game_number == 1)
    gap = critical_gap(g1, table, T)
    out = {}
    won = {int(p): bool(w) for p, w, g in zip(outcomes.player_id, outcomes.won,
                                              outcomes.game_number) if g == 1}
    for p in won:
        sel = g1.player_id == p
        cont = sel & ~g1.forced & (g1.stopped == 0)
        stop = sel & ~g1.forced & (g1.stopped == 1)
        out[p] = {"won": won[p],
                  "over_searched": bool(np.any(gap[cont] > 0)),
                  "under_searched": bool(np.any(gap[stop] < 0))}
    return out


def stopping_curve(log, table, T: int | None = None, bin_width: float = DEFAULT_BIN_WIDTH,
                   game_band=None, condition=None, outcomes=None,
                   group: str | None = None) -> BinnedCurve:
    """Bin eligible decisions by distance of their percentile to the critical value.

    ``game_band`` is an inclusive ``(lo, hi)`` range of game numbers
    (``hi=None`` is open-ended). ``condition`` is a dict over the flags of
    :func:`first_game_conditions`, e.g. ``{"won": False, "over_searched": True}``;
    it needs ``outcomes``.
    """
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    T = log.horizon() if T is None else T
    nbins = int(round(2.0 / bin_width))
    edges = np.linspace(-1.0, 1.0, nbins + 1)
    keep = ~log.forced
    if game_band is not None:
        lo, hi = game_band
        keep &= log.game_number >= lo
        if hi is not None:
            keep &= log.game_number <= hi
    if condition:
        if outcomes is None:
            raise ValueError("condition filters need outcomes")
        flags = first_game_conditions(log, outcomes, table, T)
        ok = {p for p, f in flags.items() if all(f[k] == v for k, v in condition.items())}
        keep &= np.isin(log.player_id, list(ok))
    sub = log.subset(keep)
    gap = critical_gap(sub, table, T)
    b = np.clip(np.floor((gap + 1.0) / bin_width).astype(int), 0, nbins - 1)
    counts = np.bincount(b, minlength=nbins)
    stops = np.bincount(b, weights=sub.stopped, minlength=nbins)
    return BinnedCurve(edges, counts, stops, group or _band_name(game_band))


def _band_name(band):
    if band is None:
        return "all"
    lo, hi = band
    if hi is None:
        return f"games_{lo}+"
    return f"game_{lo}" if lo == hi else f"games_{lo}-{hi}"


def stopping_curves(log, table, T: int | None = None, bands=DEFAULT_BANDS,
                    bin_width: float = DEFAULT_BIN_WIDTH) -> list[dict]:
    rows = []
    for band in bands:
        rows.extend(stopping_curve(log, table, T, bin_width, band).rows())
    return rows


def write_rows(rows: list[dict], path, columns=None) -> None:
    """Write tidy rows as CSV with a fixed column order and exact float repr."""
    if columns is None:
        columns = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            missing = set(columns) - set(r)
            if missing:
                raise ValueError(f"row missing columns {sorted(missing)}")
            w.writerow([_fmt(r[c]) for c in columns])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)
