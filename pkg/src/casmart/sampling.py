"""Search spaces, Sobol candidates, maximin selection and local perturbation.

The Sobol generator is unscrambled and uses the Joe & Kuo direction numbers
(file ``new-joe-kuo-6.21201``, S. Joe and F. Y. Kuo, "Constructing Sobol
sequences with better two-dimensional projections", SIAM J. Sci. Comput.
30, 2008) for the first 16 dimensions. Points are produced in Gray-code
order, so index ``i`` maps to the same point as in the usual recursive
construction, and any index can be generated directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

SOBOL_BITS = 32
# (degree s, polynomial interior coefficients a, initial direction integers m_1..m_s)
# for dimensions 2..16; dimension 1 is the van der Corput sequence.
JOE_KUO = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)),
    (5, 13, (1, 1, 1, 3, 11)),
    (5, 14, (1, 3, 5, 5, 31)),
    (6, 1, (1, 3, 3, 9, 7, 49)),
    (6, 13, (1, 1, 1, 15, 21, 21)),
    (6, 16, (1, 3, 1, 13, 27, 49)),
)
MAX_SOBOL_DIM = len(JOE_KUO) + 1


class SobolCapabilityError(ValueError):
    pass


class PoolExhaustedError(RuntimeError):
    pass


def _direction_numbers(d: int) -> np.ndarray:
    V = np.zeros((d, SOBOL_BITS), dtype=np.uint64)
    V[0] = [1 << (SOBOL_BITS - 1 - j) for j in range(SOBOL_BITS)]
    for k in range(1, d):
        s, a, m = JOE_KUO[k - 1]
        v = [0] * SOBOL_BITS
        for j in range(min(s, SOBOL_BITS)):
            v[j] = m[j] << (SOBOL_BITS - 1 - j)
        for j in range(s, SOBOL_BITS):
            val = v[j - s] ^ (v[j - s] >> s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    val ^= v[j - i]
            v[j] = val
        V[k] = v
    return V


_DIRECTIONS = _direction_numbers(MAX_SOBOL_DIM)


def sobol_unit(d: int, n: int, skip: int = 0) -> np.ndarray:
    """Points ``skip .. skip+n-1`` of the d-dimensional Sobol sequence in [0, 1)^d."""
    if not 1 <= d <= MAX_SOBOL_DIM:
        raise SobolCapabilityError(f"Sobol direction numbers cover 1..{MAX_SOBOL_DIM} dimensions, got {d}")
    if n < 1 or skip < 0:
        raise ValueError("need n >= 1 and skip >= 0")
    if skip + n > 2**SOBOL_BITS:
        raise SobolCapabilityError("index range exceeds 2**32")
    idx = np.arange(skip, skip + n, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    acc = np.zeros((n, d), dtype=np.uint64)
    V = _DIRECTIONS[:d]
    for j in range(SOBOL_BITS):
        bit = ((gray >> np.uint64(j)) & np.uint64(1)).astype(bool)
        if bit.any():
            acc[bit] ^= V[:, j]
    return acc.astype(np.float64) / float(2**SOBOL_BITS)


@dataclass(frozen=True)
class SearchSpace:
    """A box ``[lower, upper]`` or a finite pool of candidate points.

    In pool mode ``points`` holds every selectable row, ``available`` the
    indices open for sequential selection and ``init_indices`` (optional)
    the rows eligible for the initial design.
    """

    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    points: np.ndarray | None = None
    available: tuple[int, ...] | None = None
    init_indices: tuple[int, ...] | None = None
    scale_lower: np.ndarray | None = field(default=None, repr=False)
    scale_upper: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.points is None:
            lo = np.atleast_1d(np.asarray(self.lower, float))
            hi = np.atleast_1d(np.asarray(self.upper, float))
            if lo.shape != hi.shape or not np.all(lo < hi):
                raise ValueError("box bounds need lower < upper in every dimension")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
            object.__setattr__(self, "scale_lower", lo)
            object.__setattr__(self, "scale_upper", hi)
            return
        P = np.asarray(self.points, float)
        if P.ndim == 1:
            P = P[:, None]
        object.__setattr__(self, "points", P)
        avail = tuple(range(len(P))) if self.available is None else tuple(int(i) for i in self.available)
        if any(i < 0 or i >= len(P) for i in avail):
            raise ValueError("available indices out of range")
        object.__setattr__(self, "available", avail)
        if self.init_indices is not None:
            object.__setattr__(self, "init_indices", tuple(int(i) for i in self.init_indices))
        lo = P.min(axis=0) if self.scale_lower is None else np.asarray(self.scale_lower, float)
        hi = P.max(axis=0) if self.scale_upper is None else np.asarray(self.scale_upper, float)
        hi = np.where(hi > lo, hi, lo + 1.0)
        object.__setattr__(self, "scale_lower", lo)
        object.__setattr__(self, "scale_upper", hi)

    @classmethod
    def box(cls, bounds) -> "SearchSpace":
        b = np.asarray(bounds, float).reshape(-1, 2)
        return cls(lower=b[:, 0], upper=b[:, 1])

    @classmethod
    def pool(cls, points, available=None, init_indices=None, scale_lower=None, scale_upper=None):
        return cls(points=points, available=available, init_indices=init_indices,
                   scale_lower=scale_lower, scale_upper=scale_upper)

    @property
    def is_pool(self) -> bool:
        return self.points is not None

    @property
    def d(self) -> int:
        return len(self.scale_lower)

    def to_unit(self, X) -> np.ndarray:
        X = np.asarray(X, float)
        return (X - self.scale_lower) / (self.scale_upper - self.scale_lower)

    def from_unit(self, U) -> np.ndarray:
        U = np.asarray(U, float)
        return self.scale_lower + U * (self.scale_upper - self.scale_lower)

    def contains(self, x, atol: float = 1e-12) -> bool:
        x = np.asarray(x, float)
        if self.is_pool:
            return bool(np.any(np.all(np.abs(self.points - x) <= atol, axis=1)))
        return bool(np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol))


def sobol(space: SearchSpace, n: int, skip: int = 1) -> np.ndarray:
    """Sobol points mapped affinely onto the bounds of a box space."""
    if space.is_pool:
        raise ValueError("Sobol generation needs a box search space")
    return space.from_unit(sobol_unit(space.d, n, skip))


def min_distances(candidates, sampled, use_index: bool = False) -> np.ndarray:
    C = np.asarray(candidates, float)
    S = np.asarray(sampled, float)
    if C.ndim == 1:
        C = C[:, None]
    if S.ndim == 1:
        S = S[:, None]
    if len(C) == 0 or len(S) == 0:
        raise ValueError("maximin needs non-empty candidate and sampled sets")
    if not use_index:
        nn = np.argmin(cdist(C, S, "sqeuclidean"), axis=1)
    else:
        _, nn = cKDTree(S).query(C, k=1)
    # Both paths only locate the nearest neighbour; the distance itself is
    # computed with one formula so they agree bit for bit.
    return np.sqrt(np.sum((C - S[nn]) ** 2, axis=1))


def maximin_next(candidates, sampled, use_index: bool = False) -> int:
    """Index of the candidate farthest from its nearest sampled point."""
    return int(np.argmax(min_distances(candidates, sampled, use_index)))


def nearest_available(space: SearchSpace, u, exclude=()) -> int:
    """Pool index nearest to unit-cube point ``u`` among available rows."""
    excluded = set(exclude)
    idx = np.array([i for i in space.available if i not in excluded], dtype=int)
    if len(idx) == 0:
        raise PoolExhaustedError("no available pool points left")
    U = space.to_unit(space.points[idx])
    return int(idx[np.argmin(np.sum((U - np.asarray(u, float)) ** 2, axis=1))])


def perturb_unit(u, sigma: float, rng: np.random.Generator) -> np.ndarray:
    u = np.asarray(u, float)
    return np.clip(u + rng.normal(0.0, sigma, size=u.shape), 0.0, 1.0)


def perturb(x, sigma: float, space: SearchSpace, rng: np.random.Generator, exclude=()):
    """Gaussian step of scale ``sigma`` in unit-cube coordinates around ``x``.

    Box spaces clip to the bounds and return the point. Pool spaces snap to
    the nearest available row not listed in ``exclude`` and return
    ``(index, point)``.
    """
    if not sigma > 0:
        raise ValueError("perturbation scale must be positive")
    u = space.to_unit(x)
    if not space.is_pool:
        return space.from_unit(perturb_unit(u, sigma, rng))
    step = u + rng.normal(0.0, sigma, size=u.shape)
    i = nearest_available(space, step, exclude)
    return i, space.points[i]
