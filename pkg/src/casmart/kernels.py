"""Isotropic covariance functions for the GP surrogate.

All kernels act on Euclidean distances in the normalized input space.
Hyperparameters are exposed as log-values so the GP module can optimize
them on an unconstrained scale, and every kernel can return the partial
derivatives of its Gram matrix with respect to those log-values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np
from scipy.spatial.distance import cdist

VARIANTS = ("rbf", "matern", "rq", "constant", "product")

# (lower, upper) bounds on the natural scale, used by the optimizer.
PARAM_BOUNDS = {
    "signal_variance": (1e-5, 1e5),
    "length_scale": (1e-3, 1e3),
    "alpha": (1e-3, 1e5),
    "constant_value": (1e-5, 1e5),
}

_OWN_PARAMS = {
    "rbf": ("signal_variance", "length_scale"),
    "matern": ("signal_variance", "length_scale"),
    "rq": ("signal_variance", "length_scale", "alpha"),
    "constant": ("constant_value",),
    "product": (),
}


class KernelError(ValueError):
    """Invalid kernel specification or incompatible inputs."""


@dataclass(frozen=True)
class KernelSpec:
    variant: str
    signal_variance: float = 1.0
    length_scale: float = 1.0
    alpha: float = 1.0
    nu: float = 2.5
    constant_value: float = 1.0
    factors: tuple["KernelSpec", ...] = field(default=())

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise KernelError(f"unknown kernel variant {self.variant!r}")
        for name in ("signal_variance", "length_scale", "alpha", "constant_value"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise KernelError(f"{name} must be positive, got {value}")
        if self.variant == "matern" and self.nu not in (1.5, 2.5):
            raise KernelError(f"Matern smoothness must be 1.5 or 2.5, got {self.nu}")
        if self.variant == "product":
            if len(self.factors) < 2:
                raise KernelError("a product kernel needs at least two factors")
            object.__setattr__(self, "factors", tuple(self.factors))

    # -- constructors -------------------------------------------------

    @classmethod
    def rbf(cls, signal_variance=1.0, length_scale=1.0):
        return cls("rbf", signal_variance=signal_variance, length_scale=length_scale)

    @classmethod
    def matern(cls, nu=2.5, signal_variance=1.0, length_scale=1.0):
        return cls("matern", signal_variance=signal_variance, length_scale=length_scale, nu=nu)

    @classmethod
    def rq(cls, signal_variance=1.0, length_scale=1.0, alpha=1.0):
        return cls("rq", signal_variance=signal_variance, length_scale=length_scale, alpha=alpha)

    @classmethod
    def constant(cls, constant_value=1.0):
        return cls("constant", constant_value=constant_value)

    @classmethod
    def product(cls, *factors: "KernelSpec"):
        return cls("product", factors=tuple(factors))

    # -- hyperparameter vector ------------------------------------------

    def param_names(self) -> list[str]:
        if self.variant == "product":
            return [f"{i}.{n}" for i, f in enumerate(self.factors) for n in f.param_names()]
        return list(_OWN_PARAMS[self.variant])

    def log_params(self) -> np.ndarray:
        if self.variant == "product":
            return np.concatenate([f.log_params() for f in self.factors])
        return np.log([getattr(self, n) for n in _OWN_PARAMS[self.variant]])

    def log_bounds(self) -> list[tuple[float, float]]:
        if self.variant == "product":
            return [b for f in self.factors for b in f.log_bounds()]
        return [tuple(np.log(PARAM_BOUNDS[n])) for n in _OWN_PARAMS[self.variant]]

    def with_log_params(self, theta: Sequence[float]) -> "KernelSpec":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise KernelError(f"expected {self.n_params} log-parameters, got {theta.shape}")
        if self.variant == "product":
            out, start = [], 0
            for f in self.factors:
                out.append(f.with_log_params(theta[start:start + f.n_params]))
                start += f.n_params
            return replace(self, factors=tuple(out))
        values = {n: float(np.exp(t)) for n, t in zip(_OWN_PARAMS[self.variant], theta)}
        return replace(self, **values)

    @property
    def n_params(self) -> int:
        if self.variant == "product":
            return sum(f.n_params for f in self.factors)
        return len(_OWN_PARAMS[self.variant])

    def prior_variance(self) -> float:
        """k(x, x), identical for every x since all kernels are stationary."""
        if self.variant == "product":
            return float(np.prod([f.prior_variance() for f in self.factors]))
        if self.variant == "constant":
            return self.constant_value
        return self.signal_variance

    # -- evaluation -----------------------------------------------------

    def __call__(self, X, X2=None) -> np.ndarray:
        return kernel_matrix(self, X, X if X2 is None else X2)

    def from_sqdist(self, sqdist: np.ndarray) -> np.ndarray:
        if self.variant == "product":
            out = np.ones_like(sqdist)
            for f in self.factors:
                out = out * f.from_sqdist(sqdist)
            return out
        if self.variant == "constant":
            return np.full_like(sqdist, self.constant_value)
        s2, ell = self.signal_variance, self.length_scale
        if self.variant == "rbf":
            return s2 * np.exp(-0.5 * sqdist / ell**2)
        if self.variant == "rq":
            return s2 * (1.0 + sqdist / (2.0 * self.alpha * ell**2)) ** (-self.alpha)
        u = np.sqrt(2.0 * self.nu * sqdist) / ell
        if self.nu == 1.5:
            return s2 * (1.0 + u) * np.exp(-u)
        return s2 * (1.0 + u + u**2 / 3.0) * np.exp(-u)

    def grads_from_sqdist(self, sqdist: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Gram matrix and its derivatives w.r.t. each log-hyperparameter."""
        return self.gram_from_log_params(self.log_params(), sqdist)

    def gram_from_log_params(self, theta, sqdist: np.ndarray, dist: np.ndarray | None = None):
        """Gram matrix and log-parameter gradients at log-parameters ``theta``.

        Works on the raw vector (no intermediate specs) since this is the
        optimizer's inner loop.
        """
        if self.variant == "product":
            K, grads, start = None, [], 0
            parts = []
            for f in self.factors:
                parts.append(f.gram_from_log_params(theta[start:start + f.n_params], sqdist, dist))
                start += f.n_params
            for j, (Kj, dKj) in enumerate(parts):
                others = None
                for i, (Ki, _) in enumerate(parts):
                    if i != j:
                        others = Ki if others is None else others * Ki
                grads.extend(g * others for g in dKj)
                K = Kj if K is None else K * Kj
            return K, grads
        if self.variant == "constant":
            K = np.full_like(sqdist, math.exp(theta[0]))
            return K, [K]
        s2, ell = math.exp(theta[0]), math.exp(theta[1])
        if self.variant == "rbf":
            scaled = sqdist / ell**2
            K = s2 * np.exp(-0.5 * scaled)
            return K, [K, K * scaled]
        if self.variant == "rq":
            a = math.exp(theta[2])
            scaled = sqdist / ell**2
            base = 1.0 + scaled / (2.0 * a)
            inv = base ** (-a - 1.0)
            K = s2 * inv * base
            return K, [K, s2 * inv * scaled, K * a * ((base - 1.0) / base - np.log(base))]
        if dist is None:
            dist = np.sqrt(sqdist)
        u = (math.sqrt(2.0 * self.nu) / ell) * dist
        e = s2 * np.exp(-u)
        if self.nu == 1.5:
            return (1.0 + u) * e, [(1.0 + u) * e, u**2 * e]
        return (1.0 + u + u**2 / 3.0) * e, [(1.0 + u + u**2 / 3.0) * e, u**2 * (1.0 + u) * e / 3.0]

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        if self.variant == "product":
            return {"variant": "product", "factors": [f.to_dict() for f in self.factors]}
        out: dict[str, Any] = {"variant": self.variant}
        for name in _OWN_PARAMS[self.variant]:
            out[name] = getattr(self, name)
        if self.variant == "matern":
            out["nu"] = self.nu
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "KernelSpec":
        data = dict(data)
        variant = data.pop("variant")
        if variant == "product":
            return cls.product(*(cls.from_dict(f) for f in data.pop("factors")))
        return cls(variant, **data)


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if X.size else X.reshape(0, 0)
    if X.ndim != 2:
        raise KernelError(f"points must be a 2-D array, got shape {X.shape}")
    return X


def sqdist(X, X2) -> np.ndarray:
    X, X2 = _as_points(X), _as_points(X2)
    if len(X) == 0 or len(X2) == 0:
        return np.zeros((len(X), len(X2)))
    if X.shape[1] != X2.shape[1]:
        raise KernelError(f"dimension mismatch: {X.shape[1]} vs {X2.shape[1]}")
    return cdist(X, X2, "sqeuclidean")


def eval_kernel(spec: KernelSpec, x, x2) -> float:
    x, x2 = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(x2, float))
    if x.shape != x2.shape:
        raise KernelError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    d2 = float(np.sum((x - x2) ** 2))
    return float(spec.from_sqdist(np.array([[d2]]))[0, 0])


def kernel_matrix(spec: KernelSpec, X, X2) -> np.ndarray:
    """Pairwise covariances; empty inputs give an empty matrix of matching shape."""
    return spec.from_sqdist(sqdist(X, X2))


def parse_kernel(name: str) -> KernelSpec:
    """Build a kernel template from a short name such as ``rq*const`` or ``matern52``."""
    key = name.strip().lower().replace(" ", "")
    simple = {
        "rbf": KernelSpec.rbf(),
        "matern": KernelSpec.matern(2.5),
        "matern52": KernelSpec.matern(2.5),
        "matern32": KernelSpec.matern(1.5),
        "rq": KernelSpec.rq(),
        "const": KernelSpec.constant(),
        "constant": KernelSpec.constant(),
    }
    if "*" in key:
        return KernelSpec.product(*(parse_kernel(p) for p in key.split("*")))
    if key not in simple:
        raise KernelError(f"unknown kernel name {name!r}")
    return simple[key]
