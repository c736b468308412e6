"""Stopping models as likelihoods over decision data, with their priors.

Each model flattens its parameters into a vector ``theta``; discrete
parameters (``k``, the two-threshold boundary) are stored as floats holding
integers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import xlogy

from ..policies import PolicyParams, stop_logit, stop_probability

DEFAULT_MODELS = ("value_oblivious", "viable_k", "sample_k", "multiple_threshold",
                  "single_threshold", "two_threshold")


class EmptyDatasetError(ValueError):
    pass


@dataclass(frozen=True)
class PriorSpec:
    """Independent priors: rates and thresholds ~ U[0, 1], ``k`` ~ U{1..T-1},
    ``lam`` ~ Exponential with mean ``lam_mean``, ``eps`` ~ U[0, eps_max]."""

    lam_mean: float = 1000.0
    eps_max: float = 0.5

    def __post_init__(self):
        if self.lam_mean <= 0 or not 0 < self.eps_max <= 0.5:
            raise ValueError("invalid prior hyperparameters")


class DecisionData:
    """Eligible decisions as arrays ``i, i_star, q, y`` plus trajectory keys."""

    def __init__(self, i, i_star, q, y, player_id=None, game_number=None):
        self.i = np.asarray(i, dtype=np.int64)
        self.i_star = np.asarray(i_star, dtype=np.int64)
        self.q = np.asarray(q, dtype=float)
        self.y = np.asarray(y, dtype=np.int64)
        n = self.i.size
        if not (self.i_star.size == self.q.size == self.y.size == n):
            raise ValueError("decision arrays differ in length")
        if n and not np.all(np.isin(self.y, (0, 1))):
            raise ValueError("decisions must be 0 or 1")
        if n and (np.any(self.i < 1) or np.any(self.i_star < 1) or np.any(self.i_star > self.i)
                  or np.any((self.q < 0) | (self.q > 1) | np.isnan(self.q))):
            raise ValueError("malformed decision records")
        self.player_id = (np.zeros(n, dtype=np.int64) if player_id is None
                          else np.asarray(player_id, dtype=np.int64))
        self.game_number = (np.ones(n, dtype=np.int64) if game_number is None
                            else np.asarray(game_number, dtype=np.int64))
        self.sign = 2.0 * self.y - 1.0
        self.signed_q = self.sign * self.q

    @classmethod
    def from_log(cls, log) -> "DecisionData":
        """Non-forced records of a DecisionLog."""
        e = log.eligible()
        return cls(e.box_index, e.nondominated_count, e.percentile, e.stopped,
                   e.player_id, e.game_number)

    def __len__(self):
        return int(self.i.size)

    def subset(self, mask) -> "DecisionData":
        return DecisionData(self.i[mask], self.i_star[mask], self.q[mask], self.y[mask],
                            self.player_id[mask], self.game_number[mask])

    @cached_property
    def box_subsets(self) -> dict:
        return {int(b): self.subset(self.i == b) for b in np.unique(self.i)}

    def box(self, b: int) -> "DecisionData":
        if b in self.box_subsets:
            return self.box_subsets[b]
        return self.subset(np.zeros(len(self), dtype=bool))

    def split_by(self, key, mask) -> tuple:
        """``(self[mask], self[~mask])``, cached under ``key``."""
        cache = self.__dict__.setdefault("_splits", {})
        if key not in cache:
            cache[key] = (self.subset(mask), self.subset(~mask))
        return cache[key]

    @cached_property
    def units(self) -> np.ndarray:
        """Trajectory id per record: one unit per (player, game)."""
        keys = np.stack([self.player_id, self.game_number], axis=1)
        _, inv = np.unique(keys, axis=0, return_inverse=True)
        return inv.ravel()


class StoppingModel:
    """Base class: a policy family with prior, likelihood and coordinate blocks."""

    family = ""

    def __init__(self, horizon: int, prior: PriorSpec | None = None, label: str | None = None):
        if horizon < 2:
            raise ValueError("horizon must be >= 2")
        self.horizon = horizon
        self.prior = prior or PriorSpec()
        self.label = label or self.family
        self._setup()

    def _setup(self):
        raise NotImplementedError

    # parameter layout --------------------------------------------------------
    names: tuple = ()
    lower: np.ndarray
    upper: np.ndarray
    discrete: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.names)

    def log_prior_coord(self, j: int, x: float) -> float:
        if not self.lower[j] <= x <= self.upper[j]:
            return -np.inf
        name = self.names[j]
        if name == "lam":
            return -math.log(self.prior.lam_mean) - x / self.prior.lam_mean
        if name == "eps":
            return -math.log(self.prior.eps_max)
        if self.discrete[j]:
            return -math.log(self.upper[j] - self.lower[j] + 1)
        return 0.0

    def log_prior(self, theta) -> float:
        return float(sum(self.log_prior_coord(j, theta[j]) for j in range(self.dim)))

    def in_support(self, theta) -> bool:
        theta = np.asarray(theta)
        ok = np.all((theta >= self.lower) & (theta <= self.upper))
        return bool(ok and np.all(np.round(theta[self.discrete]) == theta[self.discrete]))

    def initial(self) -> np.ndarray:
        x = 0.5 * (self.lower + np.where(np.isfinite(self.upper), self.upper, self.lower))
        x[np.array([n == "lam" for n in self.names])] = 10.0
        x[self.discrete] = np.floor(x[self.discrete])
        return x

    def initial_widths(self) -> np.ndarray:
        w = 0.1 * (self.upper - self.lower)
        w[np.array([n == "lam" for n in self.names])] = 0.5 * self.prior.lam_mean
        return w

    def to_params(self, theta) -> PolicyParams:
        raise NotImplementedError

    # likelihood --------------------------------------------------------------
    def loglik(self, theta, data: DecisionData) -> float:
        if len(data) == 0:
            return 0.0
        f = stop_probability(self.to_params(theta), data.i, data.i_star, data.q, check=False)
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(np.where(data.y == 1, f, 1.0 - f))))

    def coordinate_data(self, j: int, theta, data: DecisionData) -> DecisionData:
        """Records whose likelihood depends on coordinate ``j``."""
        return data

    def log_posterior(self, theta, data) -> float:
        lp = self.log_prior(theta)
        return lp if lp == -np.inf else lp + self.loglik(theta, data)

    def check_data(self, data: DecisionData) -> None:
        if len(data) and (data.i.max() > self.horizon - 1):
            raise ValueError(f"decision at box {data.i.max()} for horizon {self.horizon}")


class ValueOblivious(StoppingModel):
    family = "value_oblivious"

    def _setup(self):
        T = self.horizon
        self.names = tuple(f"p_{i}" for i in range(1, T))
        self.lower = np.zeros(T - 1)
        self.upper = np.ones(T - 1)
        self.discrete = np.zeros(T - 1, dtype=bool)

    def to_params(self, theta):
        return PolicyParams(self.family, self.horizon, p=tuple(theta))

    def _counts(self, data):
        stops = np.bincount(data.i - 1, weights=data.y, minlength=self.horizon - 1)
        total = np.bincount(data.i - 1, minlength=self.horizon - 1)
        return stops, total - stops

    def loglik(self, theta, data):
        if len(data) == 0:
            return 0.0
        n1, n0 = self._counts(data)
        p = np.asarray(theta, dtype=float)
        return float(np.sum(xlogy(n1, p) + xlogy(n0, 1.0 - p)))

    def coordinate_data(self, j, theta, data):
        return data.box(j + 1)


class _KModel(StoppingModel):
    def _setup(self):
        self.names = ("k", "eps")
        self.lower = np.array([1.0, 0.0])
        self.upper = np.array([self.horizon - 1.0, self.prior.eps_max])
        self.discrete = np.array([True, False])

    def to_params(self, theta):
        return PolicyParams(self.family, self.horizon, k=int(theta[0]), eps=float(theta[1]))

    def _index(self, data):
        raise NotImplementedError

    def loglik(self, theta, data):
        if len(data) == 0:
            return 0.0
        early = self._index(data) < int(theta[0])
        # early records stop with eps, later ones with 1 - eps
        n_eps = np.sum(early & (data.y == 1)) + np.sum(~early & (data.y == 0))
        n_one = len(data) - n_eps
        eps = float(theta[1])
        return float(xlogy(n_eps, eps) + xlogy(n_one, 1.0 - eps))


class ViableK(_KModel):
    family = "viable_k"

    def _index(self, data):
        return data.i_star


class SampleK(_KModel):
    family = "sample_k"

    def _index(self, data):
        return data.i


class _ThresholdModel(StoppingModel):
    def loglik(self, theta, data):
        if len(data) == 0:
            return 0.0
        params = self.to_params(theta)
        s = stop_logit(params, data.i, data.q)
        return -float(np.sum(np.logaddexp(0.0, -data.sign * s)))


class MultipleThreshold(_ThresholdModel):
    family = "multiple_threshold"

    def _setup(self):
        T = self.horizon
        self.names = tuple(f"tau_{i}" for i in range(1, T)) + ("lam",)
        self.lower = np.zeros(T)
        self.upper = np.r_[np.ones(T - 1), np.inf]
        self.discrete = np.zeros(T, dtype=bool)

    def to_params(self, theta):
        return PolicyParams(self.family, self.horizon, tau=tuple(theta[:-1]), lam=float(theta[-1]))

    def loglik(self, theta, data):
        if len(data) == 0:
            return 0.0
        tau = np.asarray(theta[:-1], dtype=float)[data.i - 1]
        lam = float(theta[-1])
        return -float(np.sum(np.logaddexp(0.0, -lam * (data.signed_q - data.sign * tau))))

    def coordinate_data(self, j, theta, data):
        return data if j == self.horizon - 1 else data.box(j + 1)


class SingleThreshold(_ThresholdModel):
    family = "single_threshold"

    def _setup(self):
        self.names = ("tau", "lam")
        self.lower = np.zeros(2)
        self.upper = np.array([1.0, np.inf])
        self.discrete = np.zeros(2, dtype=bool)

    def to_params(self, theta):
        return PolicyParams(self.family, self.horizon, tau=(float(theta[0]),), lam=float(theta[1]))


class TwoThreshold(_ThresholdModel):
    """Early boxes (``i < T/2``) use ``tau_0``, the rest ``tau_1``."""

    family = "two_threshold"

    def _setup(self):
        self.names = ("tau_0", "tau_1", "lam")
        self.lower = np.zeros(3)
        self.upper = np.array([1.0, 1.0, np.inf])
        self.discrete = np.zeros(3, dtype=bool)

    def to_params(self, theta):
        return PolicyParams(self.family, self.horizon, tau=(float(theta[0]), float(theta[1])),
                            lam=float(theta[2]))

    def coordinate_data(self, j, theta, data):
        if j == 2:
            return data
        halves = data.split_by(("early", self.horizon), data.i < self.horizon / 2)
        return halves[j]


class TwoThresholdBoundary(TwoThreshold):
    """Two thresholds with the last early box ``b`` as a parameter."""

    family = "two_threshold_boundary"

    def _setup(self):
        self.names = ("tau_0", "tau_1", "lam", "boundary")
        self.lower = np.array([0.0, 0.0, 0.0, 1.0])
        self.upper = np.array([1.0, 1.0, np.inf, self.horizon - 1.0])
        self.discrete = np.array([False, False, False, True])

    def to_params(self, theta):
        return PolicyParams(self.family, self.horizon, tau=(float(theta[0]), float(theta[1])),
                            lam=float(theta[2]), boundary=int(theta[3]))

    def coordinate_data(self, j, theta, data):
        if j in (0, 1):
            b = int(theta[3])
            return data.split_by(("boundary", b), data.i <= b)[j]
        return data


MODEL_CLASSES = {c.family: c for c in (ValueOblivious, ViableK, SampleK, MultipleThreshold,
                                       SingleThreshold, TwoThreshold, TwoThresholdBoundary)}


def make_model(name: str, horizon: int, prior: PriorSpec | None = None,
               label: str | None = None) -> StoppingModel:
    try:
        cls = MODEL_CLASSES[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODEL_CLASSES)}") from None
    return cls(horizon, prior, label)


def log_likelihood(model: StoppingModel, theta, data: DecisionData) -> float:
    """Log-probability of every decision in ``data`` under ``model`` at ``theta``.

    ``-inf`` when a decision has probability zero.
    """
    model.check_data(data)
    if not model.in_support(theta):
        raise ValueError("theta outside the prior support")
    return model.loglik(np.asarray(theta, dtype=float), data)
