"""Game execution, cohort simulation and the decision/outcome log formats.

Rules: boxes are opened in order; a box no larger than the running maximum
is dominated and can never be stopped on; the last box is accepted if
reached; a game is won iff the stopped box holds the overall maximum.

Randomness: player ``p`` of a run seeded with ``seed`` owns the stream
``PCG64(SeedSequence(seed, spawn_key=(p,)))``. Each game consumes one
``(2, T)`` block from it: row 0 are the uniforms behind the box values,
row 1 the uniforms behind the stop decisions (stop iff ``u < f``).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .policies import PercentileMemory, percentile_rank

LOG_COLUMNS = ("player_id", "game_number", "box_index", "nondominated_count",
               "box_value", "percentile", "stopped", "forced")
OUTCOME_COLUMNS = ("player_id", "game_number", "won", "error_type", "stop_index",
                   "max_index", "depth")
ERROR_TYPES = ("none", "stopped_before_max", "stopped_after_max")
PERCENTILE_MODES = ("learned", "exact")


class PolicyContractError(ValueError):
    """A policy returned a stop probability outside [0, 1]."""


class LogFormatError(ValueError):
    """A decision or outcome file does not match its schema."""


def player_rng(seed: int, player: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(player,))))


@dataclass(frozen=True)
class DecisionRecord:
    player_id: int
    game_number: int
    box_index: int
    nondominated_count: int
    box_value: float
    percentile: float
    stopped: int
    forced: bool


@dataclass(frozen=True)
class GameOutcome:
    won: bool
    error_type: str
    stop_index: int
    max_index: int
    search_depth: int

    @classmethod
    def classify(cls, stop_index: int, max_index: int) -> "GameOutcome":
        if stop_index == max_index:
            err = "none"
        elif stop_index < max_index:
            err = "stopped_before_max"
        else:
            err = "stopped_after_max"
        return cls(stop_index == max_index, err, stop_index, max_index, stop_index)


class _Columns:
    columns: tuple = ()
    dtypes: dict = {}

    def __init__(self, **cols):
        n = None
        for name in self.columns:
            arr = np.asarray(cols.get(name, []), dtype=self.dtypes[name])
            if arr.ndim != 1:
                raise LogFormatError(f"column {name} must be 1-d")
            if n is not None and arr.size != n:
                raise LogFormatError("columns have different lengths")
            n = arr.size
            setattr(self, name, arr)
        self._n = n or 0

    def __len__(self):
        return self._n

    def subset(self, mask):
        return type(self)(**{c: getattr(self, c)[mask] for c in self.columns})

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        if not parts:
            return cls()
        return cls(**{c: np.concatenate([getattr(p, c) for p in parts]) for c in cls.columns})

    def _sorted(self, keys):
        order = np.lexsort(tuple(getattr(self, k) for k in reversed(keys)))
        return self.subset(order)

    def __eq__(self, other):
        return type(self) is type(other) and all(
            np.array_equal(getattr(self, c), getattr(other, c)) for c in self.columns)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            cols = [self._format(c) for c in self.columns]
            w.writerows(zip(*cols))

    def _format(self, c):
        arr = getattr(self, c)
        if arr.dtype == bool:
            return ["1" if v else "0" for v in arr]
        if arr.dtype.kind == "f":
            return [repr(float(v)) for v in arr]
        return [str(v) for v in arr.tolist()]

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise LogFormatError(f"{path}: empty file") from None
            header = [h.strip() for h in header]
            missing = [c for c in cls.columns if c not in header]
            if missing:
                raise LogFormatError(f"{path}: missing columns {missing}")
            idx = [header.index(c) for c in cls.columns]
            rows = [r for r in reader if r]
        if any(len(r) != len(header) for r in rows):
            raise LogFormatError(f"{path}: rows differ in length from the header")
        data = {}
        for j, c in zip(idx, cls.columns):
            raw = [r[j].strip() for r in rows]
            try:
                data[c] = cls._parse(c, raw)
            except ValueError as e:
                raise LogFormatError(f"{path}: bad value in column {c}: {e}") from None
        return cls(**data)

    @classmethod
    def _parse(cls, c, raw):
        dt = np.dtype(cls.dtypes[c])
        if dt == bool:
            out = []
            for v in raw:
                lv = v.lower()
                if lv in ("1", "true"):
                    out.append(True)
                elif lv in ("0", "false"):
                    out.append(False)
                else:
                    raise ValueError(v)
            return np.array(out, dtype=bool)
        if dt.kind in "iu":
            return np.array([int(v) for v in raw], dtype=dt)
        if dt.kind == "f":
            return np.array([float(v) for v in raw], dtype=dt)
        return np.array(raw, dtype=dt)


class DecisionLog(_Columns):
    """Column-oriented table of decisions at non-dominated boxes plus forced last boxes."""

    columns = LOG_COLUMNS
    dtypes = {"player_id": np.int64, "game_number": np.int64, "box_index": np.int64,
              "nondominated_count": np.int64, "box_value": float, "percentile": float,
              "stopped": np.int64, "forced": bool}

    def __init__(self, **cols):
        super().__init__(**cols)
        self.validate()

    def validate(self):
        if not len(self):
            return
        if np.any(self.box_index < 1) or np.any(self.nondominated_count < 1):
            raise LogFormatError("indices are 1-based")
        if np.any(self.nondominated_count > self.box_index):
            raise LogFormatError("nondominated_count exceeds box_index")
        if np.any((self.percentile < 0) | (self.percentile > 1)):
            raise LogFormatError("percentile outside [0, 1]")
        if not np.all(np.isin(self.stopped, (0, 1))):
            raise LogFormatError("stopped must be 0 or 1")
        if np.any(self.forced & (self.stopped == 0)):
            raise LogFormatError("forced records must be stops")

    def records(self):
        for r in zip(*(getattr(self, c).tolist() for c in self.columns)):
            yield DecisionRecord(*r)

    @classmethod
    def from_records(cls, records):
        records = list(records)
        return cls(**{c: [getattr(r, c) for r in records] for c in cls.columns})

    def canonical(self) -> "DecisionLog":
        return self._sorted(("player_id", "game_number", "box_index"))

    def eligible(self) -> "DecisionLog":
        """Decisions that enter model likelihoods (drops forced last boxes)."""
        return self.subset(~self.forced)

    def for_game(self, game_number: int) -> "DecisionLog":
        return self.subset(self.game_number == game_number)

    def horizon(self) -> int:
        """Largest box index seen, a lower bound on T."""
        return int(self.box_index.max()) if len(self) else 0


class OutcomeTable(_Columns):
    columns = OUTCOME_COLUMNS
    dtypes = {"player_id": np.int64, "game_number": np.int64, "won": bool,
              "error_type": "<U20", "stop_index": np.int64, "max_index": np.int64,
              "depth": np.int64}

    def __init__(self, **cols):
        super().__init__(**cols)
        if len(self) and not np.all(np.isin(self.error_type, ERROR_TYPES)):
            raise LogFormatError("unknown error_type")

    def canonical(self) -> "OutcomeTable":
        return self._sorted(("player_id", "game_number"))

    @classmethod
    def from_outcomes(cls, rows):
        """``rows`` are ``(player_id, game_number, GameOutcome)`` triples."""
        rows = list(rows)
        return cls(player_id=[r[0] for r in rows], game_number=[r[1] for r in rows],
                   won=[r[2].won for r in rows], error_type=[r[2].error_type for r in rows],
                   stop_index=[r[2].stop_index for r in rows],
                   max_index=[r[2].max_index for r in rows],
                   depth=[r[2].search_depth for r in rows])


def _as_rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _checked(f):
    f = np.asarray(f, dtype=float)
    if np.any(~((f >= 0) & (f <= 1))):
        raise PolicyContractError("stop probability outside [0, 1]")
    return f


def play_game(policy, spec, T: int, player_memory: PercentileMemory | None, rng,
              player_id: int = 0, game_number: int = 1, percentiles: str = "learned"):
    """Play one game; returns ``(GameOutcome, [DecisionRecord, ...])``.

    Every opened value is appended to ``player_memory``. ``rng`` is a
    Generator (or a seed); one ``(2, T)`` block of uniforms is consumed.
    """
    if percentiles not in PERCENTILE_MODES:
        raise ValueError(f"percentiles must be one of {PERCENTILE_MODES}")
    if player_memory is None:
        player_memory = PercentileMemory()
    block = _as_rng(rng).random((2, T))
    values = spec.quantile(block[0])
    exact_q = None if percentiles == "learned" else spec.cdf(values)
    h = -np.inf
    i_star = 0
    records = []
    stop = T
    for i in range(1, T + 1):
        x = float(values[i - 1])
        player_memory.insert(x)
        dominated = x <= h
        h = max(h, x)
        if not dominated:
            i_star += 1
        if i < T and dominated:
            continue
        if percentiles == "learned":
            q = percentile_rank(player_memory, x)
        else:
            q = float(exact_q[i - 1])
        if i == T:
            records.append(DecisionRecord(player_id, game_number, i, i_star, x, q, 1, True))
            break
        f = float(_checked(policy.stop_probability(i, i_star, q)))
        y = int(block[1, i - 1] < f)
        records.append(DecisionRecord(player_id, game_number, i, i_star, x, q, y, False))
        if y:
            stop = i
            break
    max_index = int(np.argmax(values)) + 1
    return GameOutcome.classify(stop, max_index), records


@dataclass
class CohortResult:
    log: DecisionLog
    outcomes: OutcomeTable

    def learning_curves(self, min_games: int = 0):
        from .analysis import learning_curves
        return learning_curves(self.outcomes, min_games)


def run_cohort(policy, spec, T: int, n_players: int, games_per_player: int, seed: int,
               percentiles: str = "learned") -> CohortResult:
    """Simulate ``n_players`` independent players for ``games_per_player`` games each.

    ``policy`` is shared by all players and must be stateless (e.g. a
    ``PolicyParams``); per-player state is the percentile memory only.
    The simulation is vectorised across players and bit-identical to
    calling ``play_game`` per player with ``player_rng(seed, p)``.
    """
    if n_players < 1 or games_per_player < 1:
        raise ValueError("need at least one player and one game")
    if percentiles not in PERCENTILE_MODES:
        raise ValueError(f"percentiles must be one of {PERCENTILE_MODES}")
    n = n_players
    gens = [player_rng(seed, p) for p in range(n)]
    learned = percentiles == "learned"
    if learned:
        mem = np.full((n, games_per_player * T), np.inf)
        count = np.zeros(n, dtype=np.int64)
    pieces, outcome_parts = [], []
    players = np.arange(n)

    def percentile_of(sel, x, i):
        if not learned:
            return exact_q[sel, i - 1]
        width = int(count[sel].max())
        sub = mem[sel, :width]
        less = (sub < x[:, None]).sum(axis=1)
        equal = (sub == x[:, None]).sum(axis=1)
        return (less + 0.5 * equal) / count[sel]

    for g in range(1, games_per_player + 1):
        block = np.stack([gen.random((2, T)) for gen in gens])
        values = spec.quantile(block[:, 0, :])
        exact_q = None if learned else spec.cdf(values)
        u_dec = block[:, 1, :]
        active = np.ones(n, dtype=bool)
        h = np.full(n, -np.inf)
        i_star = np.zeros(n, dtype=np.int64)
        stop = np.full(n, T, dtype=np.int64)
        for i in range(1, T + 1):
            act = players[active]
            if act.size == 0:
                break
            x = values[act, i - 1]
            if learned:
                mem[act, count[act]] = x
                count[act] += 1
            dominated = x <= h[act]
            h[act] = np.maximum(h[act], x)
            i_star[act[~dominated]] += 1
            if i == T:
                sel, xs = act, x
                q = percentile_of(sel, xs, i)
                y = np.ones(sel.size, dtype=np.int64)
                forced = np.ones(sel.size, dtype=bool)
            else:
                keep = ~dominated
                sel, xs = act[keep], x[keep]
                if sel.size == 0:
                    continue
                q = percentile_of(sel, xs, i)
                f = _checked(policy.stop_probability(np.full(sel.size, i), i_star[sel], q))
                y = (u_dec[sel, i - 1] < f).astype(np.int64)
                forced = np.zeros(sel.size, dtype=bool)
                stopped = sel[y == 1]
                active[stopped] = False
                stop[stopped] = i
            pieces.append(dict(player_id=sel, game_number=np.full(sel.size, g),
                               box_index=np.full(sel.size, i), nondominated_count=i_star[sel],
                               box_value=xs, percentile=q, stopped=y, forced=forced))
        max_index = np.argmax(values, axis=1) + 1
        won = stop == max_index
        err = np.where(won, "none", np.where(stop < max_index, "stopped_before_max",
                                              "stopped_after_max"))
        outcome_parts.append(OutcomeTable(player_id=players, game_number=np.full(n, g),
                                          won=won, error_type=err, stop_index=stop,
                                          max_index=max_index, depth=stop))
    cols = {c: np.concatenate([p[c] for p in pieces]) for c in LOG_COLUMNS}
    log = DecisionLog(**cols).canonical()
    outcomes = OutcomeTable.concat(outcome_parts).canonical()
    return CohortResult(log, outcomes)


def run_cohort_loop(policy_factory, spec, T: int, n_players: int, games_per_player: int,
                    seed: int, percentiles: str = "learned") -> CohortResult:
    """Reference cohort runner calling ``play_game`` per player.

    ``policy_factory(player_id)`` builds each player's policy, so stateful
    policies are supported. Slow; mainly a cross-check for ``run_cohort``.
    """
    records, outs = [], []
    for p in range(n_players):
        policy = policy_factory(p)
        rng = player_rng(seed, p)
        memory = PercentileMemory()
        for g in range(1, games_per_player + 1):
            outcome, recs = play_game(policy, spec, T, memory, rng, p, g, percentiles)
            records.extend(recs)
            outs.append((p, g, outcome))
    return CohortResult(DecisionLog.from_records(records).canonical(),
                        OutcomeTable.from_outcomes(outs).canonical())
