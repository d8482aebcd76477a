"""Classical acquisition functions used as sampling baselines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .gp import GPModel, Prediction, predict

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
STRATEGIES = ("ei", "pi", "ucb", "mv")


@dataclass(frozen=True)
class AcquisitionStrategy:
    variant: str
    kappa: float = 2.0
    direction: str = "maximize"

    def __post_init__(self):
        if self.variant not in STRATEGIES:
            raise ValueError(f"unknown acquisition strategy {self.variant!r}")
        if self.variant == "ucb" and not self.kappa > 0:
            raise ValueError("UCB needs kappa > 0")
        if self.direction not in ("maximize", "minimize"):
            raise ValueError(f"unknown direction {self.direction!r}")


def _improvement(pred: Prediction, f_best: float):
    mu = np.asarray(pred.mean, dtype=float)
    sigma = np.asarray(pred.std, dtype=float)
    return mu - f_best, sigma


def expected_improvement(pred: Prediction, f_best: float) -> np.ndarray:
    diff, sigma = _improvement(pred, f_best)
    out = np.maximum(diff, 0.0)
    pos = sigma > 0
    with np.errstate(over="ignore"):  # subnormal sigma: z -> +-inf, limits are exact
        z = diff[pos] / sigma[pos]
        out[pos] = diff[pos] * ndtr(z) + sigma[pos] * _INV_SQRT_2PI * np.exp(-0.5 * z**2)
    return np.maximum(out, 0.0)


def probability_of_improvement(pred: Prediction, f_best: float) -> np.ndarray:
    diff, sigma = _improvement(pred, f_best)
    out = (diff > 0).astype(float)
    pos = sigma > 0
    with np.errstate(over="ignore"):
        out[pos] = ndtr(diff[pos] / sigma[pos])
    return out


def upper_confidence_bound(pred: Prediction, kappa: float = 2.0) -> np.ndarray:
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    return np.asarray(pred.mean, float) + kappa * np.asarray(pred.std, float)


def max_variance(pred: Prediction) -> np.ndarray:
    return np.asarray(pred.std, float) ** 2


def score(pred: Prediction, strategy: AcquisitionStrategy, f_best: float) -> np.ndarray:
    if strategy.direction == "minimize":
        # Minimizing f is maximizing -f.
        pred = Prediction(-np.asarray(pred.mean), pred.std)
        f_best = -f_best
    if strategy.variant == "ei":
        return expected_improvement(pred, f_best)
    if strategy.variant == "pi":
        return probability_of_improvement(pred, f_best)
    if strategy.variant == "ucb":
        return upper_confidence_bound(pred, strategy.kappa)
    return max_variance(pred)


def argmax_acquisition(model: GPModel, candidates, strategy: AcquisitionStrategy,
                       f_best: float) -> tuple[int, np.ndarray, float]:
    """Index, point and score of the best candidate (lowest index on ties)."""
    candidates = np.asarray(candidates, dtype=float)
    if candidates.ndim == 1:
        candidates = candidates.reshape(-1, model.dim)
    if len(candidates) == 0:
        raise ValueError("candidate set is empty")
    scores = score(predict(model, candidates), strategy, f_best)
    i = int(np.argmax(scores))
    return i, candidates[i], float(scores[i])
