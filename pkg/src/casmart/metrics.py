"""Point and probabilistic accuracy scores, and replication summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import betainc, ndtr

from .gp import Prediction

_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


def rmse(predicted, actual) -> float:
    p = np.asarray(predicted, float).ravel()
    a = np.asarray(actual, float).ravel()
    if p.shape != a.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions vs {a.shape[0]} targets")
    if p.size == 0:
        raise ValueError("rmse of an empty vector")
    return float(np.sqrt(np.mean((p - a) ** 2)))


def crps_gaussian(mean, std, y):
    """Closed-form CRPS of N(mean, std**2) against ``y``; vectorized."""
    mean, std, y = np.broadcast_arrays(*(np.asarray(v, float) for v in (mean, std, y)))
    shape = mean.shape
    mean, std, y = (np.atleast_1d(v) for v in (mean, std, y))
    out = np.abs(y - mean)
    pos = std > 0
    r, s = y[pos] - mean[pos], std[pos]
    with np.errstate(over="ignore"):  # tiny std: z -> +-inf and the point-mass limit is exact
        z = r / s
        pdf = np.exp(-0.5 * z**2) / math.sqrt(2.0 * math.pi)
    out[pos] = r * (2.0 * ndtr(z) - 1.0) + s * (2.0 * pdf - _INV_SQRT_PI)
    return out.reshape(shape) if shape else float(out[0])


def mean_crps(pred: Prediction, actual) -> float:
    actual = np.asarray(actual, float).ravel()
    if len(pred.mean) != len(actual):
        raise ValueError(f"length mismatch: {len(pred.mean)} predictions vs {len(actual)} targets")
    return float(np.mean(crps_gaussian(pred.mean, pred.std, actual)))


def student_t_cdf(t: float, df: float) -> float:
    x = df / (df + t * t)
    tail = 0.5 * betainc(0.5 * df, 0.5, x)
    return 1.0 - tail if t >= 0 else tail


def student_t_ppf(p: float, df: float) -> float:
    """Quantile by bracketing root search on the incomplete-beta CDF."""
    if not 0.0 < p < 1.0:
        raise ValueError("probability must be in (0, 1)")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -student_t_ppf(1.0 - p, df)
    hi = 1.0
    while student_t_cdf(hi, df) < p:
        hi *= 2.0
    return brentq(lambda t: student_t_cdf(t, df) - p, 0.0, hi, xtol=1e-12, rtol=1e-14)


def mean_ci(values, level: float = 0.95) -> tuple[float, float]:
    v = np.asarray(values, float).ravel()
    if v.size < 2:
        raise ValueError("a confidence interval needs at least two values")
    q = student_t_ppf(0.5 * (1.0 + level), v.size - 1)
    return float(v.mean()), float(q * v.std(ddof=1) / math.sqrt(v.size))


@dataclass
class MetricSummary:
    rmse_curves: np.ndarray  # (n_runs, budget + 1)
    crps_curves: np.ndarray
    level: float = 0.95

    @property
    def n_runs(self) -> int:
        return self.rmse_curves.shape[0]

    @property
    def final_rmse(self) -> np.ndarray:
        return self.rmse_curves[:, -1]

    @property
    def final_crps(self) -> np.ndarray:
        return self.crps_curves[:, -1]

    def stats(self, values) -> dict:
        values = np.asarray(values, float)
        out = {"mean": float(values.mean())}
        if values.size >= 2:
            out["ci_half_width"] = mean_ci(values, self.level)[1]
        return out

    def to_dict(self) -> dict:
        per_iter = {}
        for name, curves in (("rmse", self.rmse_curves), ("crps", self.crps_curves)):
            per_iter[name] = [self.stats(curves[:, i]) for i in range(curves.shape[1])]
        return {
            "n_runs": self.n_runs,
            "level": self.level,
            "final": {"rmse": self.stats(self.final_rmse), "crps": self.stats(self.final_crps)},
            "per_iteration": per_iter,
        }
