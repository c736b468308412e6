"""Box-value distributions: sampling, CDF/quantile and gap calibration.

The decision problem only depends on values through their CDF, so every
distribution here is a monotone map of a standard uniform draw. The power
family ``F(x) = (x / M) ** a`` covers the three experimental conditions
(``a = 1`` is the uniform "medium" condition).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

FAMILIES = ("power", "uniform", "custom-table")
LABELS = ("low", "medium", "high", "other")
MAX_VALUE = 100_000_000.0

# bracket for shape calibration
SHAPE_MIN = 1e-3
SHAPE_MAX = 1e3


class CalibrationError(ValueError):
    """Raised when no shape in the search bracket reproduces a target gap."""


@dataclass(frozen=True)
class DistributionSpec:
    """An immutable, sampleable value distribution on ``[0, max_value]``.

    ``family="uniform"`` is normalised to ``family="power"`` with ``shape=1``.
    ``table`` holds ``(x, F(x))`` knots for the ``custom-table`` family; the
    CDF is piecewise linear between them.
    """

    family: str = "power"
    max_value: float = MAX_VALUE
    shape: float = 1.0
    label: str = "other"
    table: tuple = field(default=(), compare=True)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if not (self.max_value > 0 and math.isfinite(self.max_value)):
            raise ValueError("max_value must be positive and finite")
        if self.family == "uniform":
            if self.shape != 1.0:
                raise ValueError("uniform family has shape 1")
            object.__setattr__(self, "family", "power")
        if not (self.shape > 0 and math.isfinite(self.shape)):
            raise ValueError(f"shape must be positive, got {self.shape}")
        if self.family == "custom-table":
            knots = tuple((float(x), float(f)) for x, f in self.table)
            if len(knots) < 2:
                raise ValueError("custom-table needs at least two knots")
            xs = np.array([k[0] for k in knots])
            fs = np.array([k[1] for k in knots])
            if np.any(np.diff(xs) <= 0) or np.any(np.diff(fs) <= 0):
                raise ValueError("custom-table knots must be strictly increasing")
            if xs[0] != 0.0 or fs[0] != 0.0 or fs[-1] != 1.0:
                raise ValueError("custom-table must start at (0, 0) and end at F=1")
            if xs[-1] != self.max_value:
                raise ValueError("custom-table must end at max_value")
            object.__setattr__(self, "table", knots)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, self.max_value)
        if self.family == "custom-table":
            xs, fs = np.array(self.table).T
            return np.interp(x, xs, fs)
        return (x / self.max_value) ** self.shape

    def quantile(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.family == "custom-table":
            xs, fs = np.array(self.table).T
            return np.interp(u, fs, xs)
        return self.max_value * u ** (1.0 / self.shape)

    def to_dict(self) -> dict:
        d = {"family": self.family, "max_value": self.max_value,
             "shape": self.shape, "label": self.label}
        if self.family == "custom-table":
            d["table"] = [list(k) for k in self.table]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        return cls(family=d.get("family", "power"),
                   max_value=float(d.get("max_value", MAX_VALUE)),
                   shape=float(d.get("shape", 1.0)),
                   label=d.get("label", "other"),
                   table=tuple(tuple(k) for k in d.get("table", ())))


@dataclass(frozen=True)
class GapStatistics:
    horizon: int
    mean_gap: float
    replicates: int = 1
    std_error: float = float("nan")

    def __post_init__(self):
        if self.mean_gap < 0:
            raise ValueError("mean_gap must be nonnegative")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")


def uniform_spec(max_value: float = MAX_VALUE, label: str = "medium") -> DistributionSpec:
    return DistributionSpec("power", max_value, 1.0, label)


def sample(spec: DistributionSpec, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` i.i.d. box values. Bit-identical for identical seeds."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return spec.quantile(rng.random(n))


def _top_two(u: np.ndarray):
    part = np.partition(u, u.shape[1] - 2, axis=1)
    return part[:, -1], part[:, -2]


def estimate_gap(spec: DistributionSpec, horizon: int, replicates: int = 200_000,
                 seed=0) -> GapStatistics:
    """Monte Carlo estimate of E[max - second max] over ``horizon`` draws."""
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    rng = np.random.default_rng(seed)
    gaps = np.empty(replicates)
    chunk = 50_000
    for start in range(0, replicates, chunk):
        m = min(chunk, replicates - start)
        x = spec.quantile(rng.random((m, horizon)))
        first, second = _top_two(x)
        gaps[start:start + m] = first - second
    se = gaps.std(ddof=1) / math.sqrt(replicates) if replicates > 1 else float("nan")
    return GapStatistics(horizon, float(gaps.mean()), replicates, float(se))


def power_gap_exact(shape: float, horizon: int, max_value: float = MAX_VALUE) -> float:
    """Closed-form E[max - second max] for the power family.

    With ``s = 1/shape``, ``E[U_(n)^s] = n/(n+s)`` and
    ``E[U_(n-1)^s] = n(n-1)/((n+s)(n-1+s))``.
    """
    n, s = horizon, 1.0 / shape
    return max_value * n * s / ((n + s) * (n - 1 + s))


def peak_gap_shape(horizon: int) -> float:
    """Shape at which the power-family gap is largest.

    The gap rises from 0 as the shape grows from 0, peaks here, then
    decreases monotonically; calibration searches the decreasing branch,
    which contains the uniform case.
    """
    return 1.0 / math.sqrt(horizon * (horizon - 1))


def calibrate_shape(target: GapStatistics, max_value: float = MAX_VALUE,
                    label: str = "other", replicates: int = 200_000, seed=0,
                    rtol: float = 0.02) -> DistributionSpec:
    """Find the power shape whose simulated mean gap matches ``target``.

    Bisection on ``log(a)`` with common random numbers, so the simulated gap
    is a deterministic, monotone function of ``a`` on the search branch.
    """
    if not 0 < target.mean_gap < max_value:
        raise CalibrationError("target gap must lie in (0, max_value)")
    n = target.horizon
    rng = np.random.default_rng(seed)
    u1, u2 = _top_two(rng.random((replicates, n)))
    lu1, lu2 = np.log(u1), np.log(u2)

    def gap(log_a):
        s = math.exp(-log_a)
        return max_value * float(np.mean(np.exp(s * lu1) - np.exp(s * lu2)))

    lo = max(math.log(SHAPE_MIN), math.log(peak_gap_shape(n)))
    hi = math.log(SHAPE_MAX)
    g_lo, g_hi = gap(lo), gap(hi)
    if not g_hi <= target.mean_gap <= g_lo:
        raise CalibrationError(
            f"gap {target.mean_gap:g} unreachable for shapes in "
            f"[{math.exp(lo):.4g}, {SHAPE_MAX:g}] (range {g_hi:.4g}..{g_lo:.4g})")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) > target.mean_gap:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    log_a = 0.5 * (lo + hi)
    achieved = gap(log_a)
    if abs(achieved - target.mean_gap) > rtol * target.mean_gap:
        raise CalibrationError(f"achieved gap {achieved:g} outside tolerance")
    return DistributionSpec("power", max_value, math.exp(log_a), label)


# -- shipped constants --------------------------------------------------------

def _read_calibrated() -> dict:
    text = resources.files("stoplab.data").joinpath("distributions.json").read_text()
    return json.loads(text)


def calibrated_specs() -> dict:
    """The low/medium/high condition specs shipped with the package."""
    data = _read_calibrated()
    return {k: DistributionSpec.from_dict(v) for k, v in data["distributions"].items()}


def get_spec(label: str) -> DistributionSpec:
    try:
        return calibrated_specs()[label]
    except KeyError:
        raise ValueError(f"no calibrated distribution named {label!r}") from None


def fingerprint() -> str:
    """Short hash identifying the shipped calibration constants."""
    data = _read_calibrated()
    blob = json.dumps(data, sort_keys=True).encode()
    return f"v{data['version']}-{hashlib.sha256(blob).hexdigest()[:12]}"


def build_calibration(seed: int = 20240101, replicates: int = 200_000,
                      horizon: int = 15) -> dict:
    """Recompute the payload stored in ``data/distributions.json``."""
    targets = {"low": 14.5e6, "high": 8.0e4}
    out = {"medium": uniform_spec().to_dict()}
    for label, g in targets.items():
        spec = calibrate_shape(GapStatistics(horizon, g), label=label,
                               replicates=replicates, seed=seed)
        out[label] = spec.to_dict()
    return {
        "version": 1,
        "horizon": horizon,
        "seed": seed,
        "replicates": replicates,
        "target_gaps": {"low": targets["low"], "medium": MAX_VALUE / (horizon + 1),
                        "high": targets["high"]},
        "distributions": {k: out[k] for k in ("low", "medium", "high")},
    }
