"""Posterior sampling, cross-validated evidence and model comparison.

The cross-validated evidence of a model is

    log E_s[ p(D_test(s) | D_train(s)) ]

over random trajectory-level splits ``s``. The inner predictive density is
estimated either directly, by averaging ``p(D_test | theta)`` over draws
from the training posterior ("direct"), or by importance sampling from the
full-data posterior, ``1 / E_{theta|D}[1 / p(D_test | theta)]`` ("bronze").
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from ..solver import critical_values
from .models import (DecisionData, EmptyDatasetError, PriorSpec,
                     StoppingModel, make_model)
from .slice import SliceError, sample_categorical_log, slice_step

SCHEMA_VERSION = 1
LN10 = math.log(10.0)


class InitializationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    draws: int = 25_000
    burn: int = 5_000
    seed: int = 0
    max_steps: int = 32
    tune: bool = True
    thin_evidence: int = 1

    def __post_init__(self):
        if not 0 <= self.burn < self.draws:
            raise ValueError("need 0 <= burn < draws")


@dataclass
class PosteriorSample:
    model: str
    names: tuple
    draws: np.ndarray
    seed: int
    burn: int
    diagnostics: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.names.index(name)]

    def mean(self) -> np.ndarray:
        return self.draws.mean(axis=0)

    def credible_interval(self, level: float = 0.95) -> np.ndarray:
        """Equal-tailed interval per parameter, shape ``(dim, 2)``."""
        a = (1.0 - level) / 2.0
        return np.quantile(self.draws, [a, 1.0 - a], axis=0).T

    def summary(self) -> list[dict]:
        ci = self.credible_interval()
        return [{"parameter": n, "mean": float(m), "sd": float(s), "ci_lo": float(lo),
                 "ci_hi": float(hi), "mcse": float(mcse(self.draws[:, j]))}
                for j, (n, m, s, (lo, hi)) in enumerate(zip(
                    self.names, self.mean(), self.draws.std(axis=0, ddof=1), ci))]


def mcse(x) -> float:
    """Monte Carlo standard error of the mean by non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    n = x.size
    b = max(1, int(math.sqrt(n)))
    nb = n // b
    if nb < 2:
        return float("nan")
    means = x[: nb * b].reshape(nb, b).mean(axis=1)
    return float(means.std(ddof=1) * math.sqrt(b / n))


def _coord_logp(model, theta, j, data):
    sub = model.coordinate_data(j, theta, data)

    def logp(x):
        lp = model.log_prior_coord(j, x)
        if lp == -np.inf:
            return lp
        old = theta[j]
        theta[j] = x
        try:
            return lp + model.loglik(theta, sub)
        finally:
            theta[j] = old
    return logp


def sample_posterior(model: StoppingModel, data: DecisionData,
                     config: SamplerConfig = SamplerConfig(), theta0=None) -> PosteriorSample:
    """Coordinate-wise slice sampling; discrete coordinates are drawn exactly
    from their full conditional by enumeration.

    During burn-in each slice width is retuned to twice the mean absolute
    move of its coordinate.
    """
    if len(data) == 0:
        raise EmptyDatasetError("empty dataset")
    model.check_data(data)
    rng = np.random.default_rng(config.seed)
    theta = np.array(model.initial() if theta0 is None else theta0, dtype=float)
    lp0 = model.log_posterior(theta, data)
    if not math.isfinite(lp0):
        raise InitializationError(
            f"{model.label}: log posterior {lp0} at initial point "
            f"{dict(zip(model.names, theta.tolist()))}")
    widths = model.initial_widths()
    moves = np.zeros(model.dim)
    out = np.empty((config.draws - config.burn, model.dim))
    evals = 0
    for it in range(config.draws):
        before = theta.copy()
        for j in range(model.dim):
            if model.discrete[j]:
                support = np.arange(model.lower[j], model.upper[j] + 1)
                logw = np.array([_coord_logp(model, theta, j, data)(v) for v in support])
                theta[j] = support[sample_categorical_log(logw, rng)]
                evals += support.size
                continue
            logp = _coord_logp(model, theta, j, data)
            try:
                x, _, ne = slice_step(theta[j], logp, widths[j], rng,
                                      max_steps=config.max_steps,
                                      lower=model.lower[j], upper=model.upper[j])
            except SliceError as e:
                raise SliceError(f"{model.label}/{model.names[j]}: {e}") from None
            theta[j] = x
            evals += ne
        if it < config.burn:
            if config.tune:
                moves += np.abs(theta - before)
                tuned = 2.0 * moves / (it + 1)
                widths = np.where(tuned > 0, tuned, widths)
        else:
            out[it - config.burn] = theta
    diag = {"evals_per_sweep": evals / config.draws,
            "final_widths": widths.tolist(),
            "log_posterior_final": model.log_posterior(theta, data)}
    return PosteriorSample(model.label, model.names, out, config.seed, config.burn, diag)


# -- cross-validation ----------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    """Random trajectory-level train/test splits."""

    test_fraction: float = 0.2
    n_splits: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.test_fraction < 1 or self.n_splits < 1:
            raise ValueError("invalid split spec")


def make_splits(data: DecisionData, spec: SplitSpec) -> list[np.ndarray]:
    """Boolean test masks, one per split; whole (player, game) trajectories move together."""
    units = data.units
    n_units = int(units.max()) + 1 if len(data) else 0
    if n_units < 2:
        raise ValueError("need at least two trajectories to split")
    n_test = min(n_units - 1, max(1, int(round(spec.test_fraction * n_units))))
    masks = []
    for s in range(spec.n_splits):
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(s,)))
        test_units = rng.permutation(n_units)[:n_test]
        masks.append(np.isin(units, test_units))
    return masks


def _test_logliks(model, post: PosteriorSample, test: DecisionData, thin: int) -> np.ndarray:
    draws = post.draws[::thin]
    return np.array([model.loglik(th, test) for th in draws])


@dataclass
class CVEvidence:
    model: str
    log_evidence: float
    split_log_evidence: list
    n_test: list
    estimator: str

    @property
    def mean_split_log_evidence(self) -> float:
        return float(np.mean(self.split_log_evidence))


def _split_seed(config: SamplerConfig, *key) -> SamplerConfig:
    ss = np.random.SeedSequence(config.seed, spawn_key=tuple(key))
    return SamplerConfig(config.draws, config.burn, int(ss.generate_state(1)[0]),
                         config.max_steps, config.tune, config.thin_evidence)


def cv_evidence(model: StoppingModel, data: DecisionData, splits: SplitSpec = SplitSpec(),
                config: SamplerConfig = SamplerConfig(), estimator: str = "direct",
                key: tuple = ()) -> CVEvidence:
    """Cross-validated log evidence ``log E_s p(D_test | model, D_train)``."""
    if estimator not in ("direct", "bronze"):
        raise ValueError("estimator must be 'direct' or 'bronze'")
    if len(data) == 0:
        raise EmptyDatasetError("empty dataset")
    masks = make_splits(data, splits)
    per_split, n_test = [], []
    full_post = None
    if estimator == "bronze":
        full_post = sample_posterior(model, data, _split_seed(config, *key, 10**6))
    for s, test_mask in enumerate(masks):
        test, train = data.subset(test_mask), data.subset(~test_mask)
        if estimator == "direct":
            post = sample_posterior(model, train, _split_seed(config, *key, s))
            ll = _test_logliks(model, post, test, config.thin_evidence)
            est = logsumexp(ll) - math.log(ll.size)
        else:
            ll = _test_logliks(model, full_post, test, config.thin_evidence)
            est = -(logsumexp(-ll) - math.log(ll.size))
        per_split.append(float(est))
        n_test.append(len(test))
    log_ev = float(logsumexp(per_split) - math.log(len(per_split)))
    return CVEvidence(model.label, log_ev, per_split, n_test, estimator)


# -- model comparison ------------------------------------------------------------

@dataclass
class EvidenceReport:
    """Cross-validated evidences per game number, normalised to the weakest model."""

    horizon: int
    rows: list
    warnings: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def for_game(self, game_number: int) -> dict:
        return {r["model"]: r for r in self.rows if r["game_number"] == game_number}

    def log10_bayes_factor(self, game_number: int, a: str, b: str) -> float:
        g = self.for_game(game_number)
        return (g[a]["log_cv_evidence"] - g[b]["log_cv_evidence"]) / LN10

    def ranking(self, game_number: int) -> list[str]:
        g = self.for_game(game_number)
        return sorted(g, key=lambda m: -g[m]["log_cv_evidence"])

    def to_dict(self) -> dict:
        return {"schema": "stoplab.evidence", "schema_version": SCHEMA_VERSION,
                "horizon": self.horizon, "rows": self.rows, "warnings": self.warnings,
                "config": self.config}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


REPORT_COLUMNS = ("game_number", "model", "n_decisions", "log_cv_evidence",
                  "log10_bf_normalized", "mean_split_log_evidence")


def compare_models(models, log_or_data, horizon: int, splits: SplitSpec = SplitSpec(),
                   prior: PriorSpec | None = None, config: SamplerConfig = SamplerConfig(),
                   games=None, estimator: str = "direct") -> EvidenceReport:
    """Cross-validated evidence of each model, separately for each game number.

    ``models`` are model names or StoppingModel instances (labels must be
    unique). Normalised factors are log10 Bayes factors against the
    lowest-evidence model of the same game number.
    """
    prior = prior or PriorSpec()
    models = [make_model(m, horizon, prior) if isinstance(m, str) else m for m in models]
    labels = [m.label for m in models]
    if len(models) < 2:
        raise ValueError("compare at least two models")
    if len(set(labels)) != len(labels):
        raise ValueError("model labels must be unique")
    data = (log_or_data if isinstance(log_or_data, DecisionData)
            else DecisionData.from_log(log_or_data))
    if games is None:
        games = sorted(set(data.game_number.tolist()))
    rows, notes = [], []
    for g in games:
        sub = data.subset(data.game_number == g)
        if len(sub) == 0:
            notes.append({"game_number": int(g), "warning": "no decisions; skipped"})
            continue
        results = [cv_evidence(m, sub, splits, config, estimator, key=(int(g), idx))
                   for idx, m in enumerate(models)]
        floor = min(r.log_evidence for r in results)
        for r in results:
            rows.append({"game_number": int(g), "model": r.model, "n_decisions": len(sub),
                         "log_cv_evidence": r.log_evidence,
                         "log10_bf_normalized": (r.log_evidence - floor) / LN10,
                         "mean_split_log_evidence": r.mean_split_log_evidence})
    for n in notes:
        warnings.warn(f"game {n['game_number']}: {n['warning']}")
    cfg = {"splits": asdict(splits), "sampler": asdict(config), "prior": asdict(prior),
           "estimator": estimator, "models": labels}
    return EvidenceReport(horizon, rows, notes, cfg)


def estimate_thresholds(log_or_data, horizon: int, prior: PriorSpec | None = None,
                        config: SamplerConfig = SamplerConfig(), games=None,
                        level: float = 0.95) -> list[dict]:
    """Posterior mean and central credible interval of each box threshold.

    One multiple-threshold fit per game number; each row carries the
    optimal threshold ``z_{T-i+1}`` for reference.
    """
    data = (log_or_data if isinstance(log_or_data, DecisionData)
            else DecisionData.from_log(log_or_data))
    z = critical_values(horizon)
    model = make_model("multiple_threshold", horizon, prior)
    if games is None:
        games = sorted(set(data.game_number.tolist()))
    rows = []
    for g in games:
        sub = data.subset(data.game_number == g)
        if len(sub) == 0:
            continue
        post = sample_posterior(model, sub, _split_seed(config, int(g)))
        ci = post.credible_interval(level)
        mean = post.mean()
        for i in range(1, horizon):
            rows.append({"game_number": int(g), "box_index": i, "tau_mean": float(mean[i - 1]),
                         "ci_lo": float(ci[i - 1, 0]), "ci_hi": float(ci[i - 1, 1]),
                         "optimal": float(z[horizon - i]),
                         "n_decisions": int(np.sum(sub.i == i)),
                         "lam_mean": float(mean[-1]), "lam_ci_lo": float(ci[-1, 0]),
                         "lam_ci_hi": float(ci[-1, 1])})
    return rows
