"""Exact Gaussian-process regression with a zero prior mean.

Fitting factorizes ``K(X, X) + noise * I`` once by Cholesky; predictions,
the log marginal likelihood and rank-one updates all reuse that factor.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotri
from scipy.optimize import minimize

from .kernels import KernelSpec, sqdist

log = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_MAX = 1e-4
NOISE_BOUNDS = (1e-6, 1e-1)
INIT_RANGE = (1e-2, 1e2)
_LOG_2PI = np.log(2.0 * np.pi)
# Relative LML tolerance for L-BFGS-B; tighter values only move the LML in
# the seventh significant digit while costing about a third more evaluations.
OPT_FTOL = 1e-6


class GPFitError(RuntimeError):
    """Covariance matrix stayed non positive definite after jitter escalation."""

    def __init__(self, jitters):
        self.jitters = list(jitters)
        super().__init__(f"Cholesky factorization failed with jitter levels {self.jitters}")


class GPOptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def append(self, x, y) -> "Dataset":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return Dataset(np.vstack([self.X, x]), np.append(self.y, y))


@dataclass(frozen=True)
class Prediction:
    mean: np.ndarray
    std: np.ndarray

    @property
    def var(self) -> np.ndarray:
        return self.std**2

    def __len__(self):
        return len(self.mean)

    def __getitem__(self, i) -> "Prediction":
        return Prediction(np.atleast_1d(self.mean[i]), np.atleast_1d(self.std[i]))


@dataclass(frozen=True)
class GPModel:
    kernel: KernelSpec
    noise_variance: float
    train: Dataset
    chol: np.ndarray
    weights: np.ndarray
    log_marginal_likelihood: float
    jitter: float = 0.0

    @property
    def dim(self) -> int:
        return self.train.d

    def predict(self, Xq) -> Prediction:
        return predict(self, Xq)


def _factor(K: np.ndarray) -> tuple[np.ndarray, float]:
    n = K.shape[0]
    tried = []
    jitter = 0.0
    while True:
        try:
            return np.linalg.cholesky(K + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            tried.append(jitter)
            jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
            if jitter > JITTER_MAX * (1 + 1e-9):
                raise GPFitError(tried) from None


def _lml(y, L, w) -> float:
    n = len(y)
    return float(-0.5 * y @ w - np.sum(np.log(np.diag(L))) - 0.5 * n * _LOG_2PI)


def fit(train: Dataset, kernel: KernelSpec, noise_variance: float) -> GPModel:
    if train.n < 1:
        raise ValueError("cannot fit a GP to an empty dataset")
    if noise_variance < 0:
        raise ValueError("noise variance must be non-negative")
    K = kernel.from_sqdist(sqdist(train.X, train.X))
    K[np.diag_indices_from(K)] += noise_variance
    L, jitter = _factor(K)
    w = cho_solve((L, True), train.y)
    return GPModel(kernel, float(noise_variance), train, L, w, _lml(train.y, L, w), jitter)


def predict(model: GPModel, Xq) -> Prediction:
    Xq = np.asarray(Xq, dtype=float)
    if Xq.ndim == 1:
        Xq = Xq.reshape(-1, model.dim) if model.dim > 1 or Xq.size != 1 else Xq.reshape(1, 1)
    if Xq.shape[1] != model.dim:
        raise ValueError(f"query dimension {Xq.shape[1]} does not match model dimension {model.dim}")
    Ks = model.kernel.from_sqdist(sqdist(model.train.X, Xq))
    mean = Ks.T @ model.weights
    v = solve_triangular(model.chol, Ks, lower=True, check_finite=False)
    var = model.kernel.prior_variance() - np.einsum("ij,ij->j", v, v)
    return Prediction(mean, np.sqrt(np.maximum(var, 0.0)))


def update_with_observation(model: GPModel, x, y: float, refit_hyperparameters: bool = False,
                            restarts: int = 5, seed: int = 0) -> GPModel:
    """Return a new model whose training set also contains ``(x, y)``.

    With fixed hyperparameters the Cholesky factor is extended by one row
    instead of being recomputed.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.dim:
        raise ValueError(f"point dimension {x.shape[0]} does not match model dimension {model.dim}")
    if not np.isfinite(y):
        raise ValueError(f"observation must be finite, got {y}")
    train = model.train.append(x, y)
    if refit_hyperparameters:
        return optimize_hyperparameters(train, model.kernel, restarts, seed)

    k = model.kernel.from_sqdist(sqdist(model.train.X, x[None, :]))[:, 0]
    l12 = solve_triangular(model.chol, k, lower=True, check_finite=False)
    d = model.kernel.prior_variance() + model.noise_variance + model.jitter - l12 @ l12
    if model.jitter > 0 or d <= 1e-12 * (model.kernel.prior_variance() + model.noise_variance):
        # Poorly conditioned extension; refactor from scratch with jitter escalation.
        return fit(train, model.kernel, model.noise_variance)
    n = model.train.n
    L = np.zeros((n + 1, n + 1))
    L[:n, :n] = model.chol
    L[n, :n] = l12
    L[n, n] = np.sqrt(d)
    w = cho_solve((L, True), train.y)
    return GPModel(model.kernel, model.noise_variance, train, L, w, _lml(train.y, L, w), 0.0)


def _neg_lml_and_grad(theta, y, template: KernelSpec, fixed_noise, D, dist):
    n_k = template.n_params
    K, dK = template.gram_from_log_params(theta[:n_k], D, dist)
    noise = fixed_noise if fixed_noise is not None else math.exp(theta[n_k])
    K = K + noise * np.eye(len(y))
    try:
        L, _ = _factor(K)
    except GPFitError:
        return 1e25, np.zeros_like(theta)
    w = cho_solve((L, True), y, check_finite=False)
    lml = _lml(y, L, w)
    Kinv, info = dpotri(L, lower=1)
    if info != 0:
        return 1e25, np.zeros_like(theta)
    Kinv = np.tril(Kinv) + np.tril(Kinv, -1).T
    inner = np.outer(w, w) - Kinv
    grad = [0.5 * np.vdot(inner, g) for g in dK]
    if fixed_noise is None:
        grad.append(0.5 * noise * np.trace(inner))
    return -lml, -np.asarray(grad)


def optimize_hyperparameters(train: Dataset, kernel_family: KernelSpec, restarts: int = 5,
                             seed: int = 0, noise_variance: float | None = None,
                             warm_start: GPModel | None = None) -> GPModel:
    """Multi-restart maximization of the log marginal likelihood.

    Kernel hyperparameters (and the noise variance unless ``noise_variance``
    is given) are searched on a log scale with L-BFGS-B. Each restart starts
    from a point drawn log-uniformly from [1e-2, 1e2] (the noise from its own
    bounds). ``warm_start`` adds one extra start at that model's values.
    """
    if train.n < 2:
        raise ValueError("hyperparameter optimization needs at least two observations")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = np.random.default_rng(seed)
    n_k = kernel_family.n_params
    bounds = list(kernel_family.log_bounds())
    if noise_variance is None:
        bounds.append(tuple(np.log(NOISE_BOUNDS)))
    lo, hi = np.log(INIT_RANGE)
    starts = []
    for _ in range(restarts):
        theta = rng.uniform(lo, hi, size=len(bounds))
        if noise_variance is None:
            theta[n_k] = rng.uniform(*bounds[n_k])
        starts.append(theta)
    if warm_start is not None:
        theta = warm_start.kernel.log_params()
        if noise_variance is None:
            theta = np.append(theta, np.log(np.clip(warm_start.noise_variance, *NOISE_BOUNDS)))
        starts.append(np.clip(theta, [b[0] for b in bounds], [b[1] for b in bounds]))

    D = sqdist(train.X, train.X)
    dist = np.sqrt(D)
    best_theta, best_val = None, np.inf
    for theta0 in starts:
        res = minimize(_neg_lml_and_grad, theta0, args=(train.y, kernel_family, noise_variance, D, dist),
                       jac=True, method="L-BFGS-B", bounds=bounds, options={"ftol": OPT_FTOL})
        if np.isfinite(res.fun) and res.fun < 1e24 and res.fun < best_val:
            best_theta, best_val = res.x, res.fun
    if best_theta is None:
        raise GPOptimizationError(f"all {len(starts)} restarts failed to fit")
    kernel = kernel_family.with_log_params(best_theta[:n_k])
    noise = noise_variance if noise_variance is not None else float(np.exp(best_theta[n_k]))
    return fit(train, kernel, noise)
