"""Surprise measures for a Gaussian predictive distribution.

Three measures are provided: Shannon surprise (negative log predictive
density of an observation), Bayesian surprise (KL divergence between the
predictive at ``x`` after and before absorbing the observation) and the
confidence-adjusted surprise (CAS), which adds a KL term against a wide
"flat" reference Gaussian, a confidence correction and a constant
adjustment. Every measure is a convex quadratic in the residual
``y - mu(x)``, so a credible-interval boundary maps to a threshold on the
measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .gp import GPModel, predict, update_with_observation

MEASURES = ("cas", "shannon", "bayesian")
SIGMA_FLOOR = 1e-8
_LOG_2PI = math.log(2.0 * math.pi)


class DegenerateDistributionError(ValueError):
    pass


def std_normal_cdf(z):
    return ndtr(z)


def std_normal_pdf(z):
    return np.exp(-0.5 * np.square(z)) / math.sqrt(2.0 * math.pi)


def std_normal_ppf(p):
    return ndtri(p)


@dataclass(frozen=True)
class FlatPrior:
    mean: float = 0.0
    std: float = 10.0

    def __post_init__(self):
        if not (math.isfinite(self.std) and self.std > 0):
            raise ValueError(f"flat prior std must be positive, got {self.std}")

    def dominates(self, std: float) -> bool:
        return self.std >= std


@dataclass(frozen=True)
class SurpriseBreakdown:
    shannon: float
    bayesian_flat: float
    confidence_correction: float
    adjustment: float
    cas: float
    bayesian: float = float("nan")

    def value(self, measure: str) -> float:
        if measure == "cas":
            return self.cas
        if measure == "shannon":
            return self.shannon
        if measure == "bayesian":
            return self.bayesian
        raise ValueError(f"unknown surprise measure {measure!r}")


def shannon_surprise(mean: float, std: float, noise_variance: float, y: float) -> float:
    """Negative log density of ``y`` under N(mean, std**2 + noise_variance)."""
    total = std**2 + noise_variance
    if not total > 0:
        raise DegenerateDistributionError("predictive variance is zero")
    return 0.5 * (_LOG_2PI + math.log(total)) + (y - mean) ** 2 / (2.0 * total)


def bayesian_surprise(prior: tuple[float, float], posterior: tuple[float, float]) -> float:
    """KL(posterior || prior) for two univariate Gaussians given as (mean, std)."""
    mu_p, s_p = prior
    mu_q, s_q = posterior
    if not (s_p > 0 and s_q > 0):
        raise ValueError("standard deviations must be positive")
    return math.log(s_p / s_q) + (s_q**2 + (mu_q - mu_p) ** 2) / (2.0 * s_p**2) - 0.5


def flat_bayesian_surprise(posterior: tuple[float, float], flat: FlatPrior) -> float:
    return bayesian_surprise((flat.mean, flat.std), posterior)


def confidence_correction(prior_std: float) -> float:
    if not prior_std > 0:
        raise ValueError("prior std must be positive")
    return -0.5 * math.log(2.0 * math.pi * math.e * prior_std**2)


def flat_adjustment(flat: FlatPrior) -> float:
    tail = 1.0 - float(ndtr(flat.mean / flat.std))
    if tail <= 0.0:
        raise OverflowError("flat prior mean too far in the upper tail")
    return -math.log(tail)


def _posterior_at(model: GPModel, x: np.ndarray, y: float) -> tuple[float, float]:
    post = predict(update_with_observation(model, x, y), x[None, :])
    return float(post.mean[0]), max(float(post.std[0]), SIGMA_FLOOR)


def breakdown(model: GPModel, x, y: float, flat: FlatPrior, prior=None) -> SurpriseBreakdown:
    """All surprise components for observing ``y`` at ``x``.

    ``prior`` optionally supplies the pre-update (mean, std) at ``x`` so
    callers evaluating several ``y`` at one point skip a prediction.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if not math.isfinite(y):
        raise ValueError(f"observation must be finite, got {y}")
    if prior is None:
        pred = predict(model, x[None, :])
        prior = float(pred.mean[0]), float(pred.std[0])
    mu, sigma = prior
    sigma_c = max(sigma, SIGMA_FLOOR)
    post = _posterior_at(model, x, y)
    s = shannon_surprise(mu, sigma, model.noise_variance, y)
    kl_flat = flat_bayesian_surprise(post, flat)
    c = confidence_correction(sigma_c)
    a = flat_adjustment(flat)
    return SurpriseBreakdown(
        shannon=s,
        bayesian_flat=kl_flat,
        confidence_correction=c,
        adjustment=a,
        cas=s + kl_flat + c - a,
        bayesian=bayesian_surprise((mu, sigma_c), post),
    )


def cas(model: GPModel, x, y: float, flat: FlatPrior) -> SurpriseBreakdown:
    return breakdown(model, x, y, flat)


def credible_z(credible_level: float) -> float:
    if not 0.0 < credible_level < 1.0:
        raise ValueError("credible level must lie in (0, 1)")
    return float(ndtri(0.5 * (1.0 + credible_level)))


def boundary_response(model: GPModel, x, credible_level: float, y=None, prior=None) -> float:
    """Edge of the central credible interval of the noisy predictive at ``x``.

    The edge on the same side of the mean as ``y`` is returned (upper edge
    when ``y`` is None).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if prior is None:
        pred = predict(model, x[None, :])
        prior = float(pred.mean[0]), float(pred.std[0])
    mu, sigma = prior
    half = credible_z(credible_level) * math.sqrt(sigma**2 + model.noise_variance)
    return mu - half if (y is not None and y < mu) else mu + half


def threshold(model: GPModel, x, flat: FlatPrior, credible_level: float = 0.95,
              measure: str = "cas", y=None, prior=None) -> float:
    """Value of ``measure`` at the credible-interval edge."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if prior is None:
        pred = predict(model, x[None, :])
        prior = float(pred.mean[0]), float(pred.std[0])
    edge = boundary_response(model, x, credible_level, y=y, prior=prior)
    return breakdown(model, x, edge, flat, prior=prior).value(measure)


def cas_threshold(model: GPModel, x, flat: FlatPrior, credible_level: float = 0.95, y=None) -> float:
    return threshold(model, x, flat, credible_level, "cas", y=y)


def evaluate(model: GPModel, x, y: float, flat: FlatPrior, credible_level: float = 0.95,
             measure: str = "cas") -> tuple[SurpriseBreakdown, float, bool]:
    """Breakdown, threshold and surprise flag for one observation."""
    if measure not in MEASURES:
        raise ValueError(f"unknown surprise measure {measure!r}")
    x = np.asarray(x, dtype=float).reshape(-1)
    pred = predict(model, x[None, :])
    prior = float(pred.mean[0]), float(pred.std[0])
    b = breakdown(model, x, y, flat, prior=prior)
    k = threshold(model, x, flat, credible_level, measure, y=y, prior=prior)
    return b, k, b.value(measure) > k
