"""Benchmark objectives, the noisy 1-D demo and tabular pool objectives.

Closed forms of the benchmarks follow the Virtual Library of Simulation
Experiments (Surjanovic & Bingham, https://www.sfu.ca/~ssurjano/):

* six-hump camel: f = (4 - 2.1 x1^2 + x1^4/3) x1^2 + x1 x2 + (-4 + 4 x2^2) x2^2
* Griewank: f = 1 + sum(x_i^2) / 4000 - prod(cos(x_i / sqrt(i)))
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .sampling import SearchSpace, sobol

log = logging.getLogger(__name__)

SIX_HUMP_BOUNDS = ((-3.0, 3.0), (-2.0, 2.0))
GRIEWANK_BOUNDS = ((-600.0, 600.0),) * 5
DEMO_BOUNDS = ((-1.0, 2.0),)
DEMO_NOISE_STD = 0.05

FATIGUE_FEATURES = ("NT", "CT", "Cr", "QmT", "DT", "Ct")
FATIGUE_TARGET = "FS"


def _check_bounds(x: np.ndarray, bounds, name: str):
    b = np.asarray(bounds, float)
    if x.shape != (len(b),):
        raise ValueError(f"{name} expects a {len(b)}-vector, got shape {x.shape}")
    if np.any(x < b[:, 0]) or np.any(x > b[:, 1]):
        raise ValueError(f"{name}: point {x} outside bounds")


def six_hump(x) -> float:
    x = np.asarray(x, float)
    _check_bounds(x, SIX_HUMP_BOUNDS, "six_hump")
    x1, x2 = x
    return float((4.0 - 2.1 * x1**2 + x1**4 / 3.0) * x1**2 + x1 * x2 + (-4.0 + 4.0 * x2**2) * x2**2)


def griewank(x) -> float:
    x = np.asarray(x, float)
    _check_bounds(x, GRIEWANK_BOUNDS, "griewank")
    i = np.arange(1, len(x) + 1)
    return float(1.0 + np.sum(x**2) / 4000.0 - np.prod(np.cos(x / np.sqrt(i))))


def demo_1d(x, rng: np.random.Generator | None = None, noise_std: float = DEMO_NOISE_STD) -> float:
    """``-sin(5x) - 0.75x + 0.75x`` plus Gaussian noise; the linear terms cancel."""
    x = float(np.asarray(x, float).reshape(-1)[0])
    value = -math.sin(5.0 * x) - 0.75 * x + 0.75 * x
    if rng is not None and noise_std > 0:
        value += rng.normal(0.0, noise_std)
    return value


@dataclass
class Objective:
    """A black box ``f(x)`` over a search space, with optional additive noise."""

    name: str
    func: Callable[[np.ndarray], float]
    space: SearchSpace
    noise_std: float = 0.0
    test_points: np.ndarray | None = None
    test_values: np.ndarray | None = None

    def __call__(self, x, rng: np.random.Generator | None = None) -> float:
        value = self.func(np.asarray(x, float))
        if self.noise_std > 0 and rng is not None:
            value += rng.normal(0.0, self.noise_std)
        return float(value)

    def true_values(self, X) -> np.ndarray:
        return np.array([self.func(np.asarray(x, float)) for x in X])

    def test_set(self) -> tuple[np.ndarray, np.ndarray]:
        if self.test_points is None:
            raise ValueError(f"objective {self.name!r} has no test grid")
        if self.test_values is None:
            self.test_values = self.true_values(self.test_points)
        return self.test_points, self.test_values


# Held-out test grids start far beyond any index used for design or
# candidate generation, so they never coincide with training points.
TEST_GRID_SKIP = 2**24


def make_objective(name: str, noise_std: float | None = None) -> Objective:
    key = name.lower().replace("_", "-")
    if key in ("six-hump", "sixhump", "six-hump-camel"):
        space = SearchSpace.box(SIX_HUMP_BOUNDS)
        return Objective("six-hump", six_hump, space, noise_std or 0.0,
                         sobol(space, 1024, TEST_GRID_SKIP))
    if key == "griewank":
        space = SearchSpace.box(GRIEWANK_BOUNDS)
        return Objective("griewank", griewank, space, noise_std or 0.0,
                         sobol(space, 4096, TEST_GRID_SKIP))
    if key in ("demo-1d", "demo"):
        space = SearchSpace.box(DEMO_BOUNDS)
        grid = np.linspace(-1.0, 2.0, 301)[:, None]
        return Objective("demo-1d", lambda x: demo_1d(x, None), space,
                         DEMO_NOISE_STD if noise_std is None else noise_std, grid)
    raise ValueError(f"unknown objective {name!r}")


# -- tabular pools -----------------------------------------------------------


class SchemaError(ValueError):
    pass


class CapacityError(ValueError):
    pass


@dataclass
class TablePool:
    X: np.ndarray
    y: np.ndarray
    feature_columns: tuple[str, ...] = FATIGUE_FEATURES
    target_column: str = FATIGUE_TARGET
    splits: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.y)

    def split(self, n_initial: int, n_candidates: int, seed: int) -> dict[str, np.ndarray]:
        """Disjoint initial / candidate / test index sets from a seeded permutation."""
        if n_initial + n_candidates >= self.n:
            raise CapacityError(
                f"table has {self.n} rows, need more than {n_initial} initial + {n_candidates} candidates")
        perm = np.random.default_rng(seed).permutation(self.n)
        self.splits = {
            "initial": np.sort(perm[:n_initial]),
            "candidate": np.sort(perm[n_initial:n_initial + n_candidates]),
            "test": np.sort(perm[n_initial + n_candidates:]),
        }
        return self.splits

    def space(self) -> SearchSpace:
        """Pool over initial + candidate rows, scaled by the min/max of all rows."""
        if not self.splits:
            raise ValueError("call split() first")
        rows = np.concatenate([self.splits["initial"], self.splits["candidate"]])
        n_init = len(self.splits["initial"])
        return SearchSpace.pool(self.X[rows], available=range(n_init, len(rows)),
                                init_indices=range(n_init),
                                scale_lower=self.X.min(axis=0), scale_upper=self.X.max(axis=0))

    def objective(self) -> Objective:
        rows = np.concatenate([self.splits["initial"], self.splits["candidate"]])
        lookup = {self.X[r].tobytes(): float(self.y[r]) for r in rows}

        def func(x):
            try:
                return lookup[np.asarray(x, float).tobytes()]
            except KeyError:
                raise ValueError(f"point {x} is not a pool row") from None

        test = self.splits["test"]
        return Objective("table", func, self.space(), 0.0, self.X[test], self.y[test])

    def write_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([*self.feature_columns, self.target_column])
            for row, target in zip(self.X, self.y):
                w.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def load_table(path, feature_columns=FATIGUE_FEATURES, target_column=FATIGUE_TARGET) -> TablePool:
    """Read a comma-separated table with a header row; incomplete rows are dropped."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (*feature_columns, target_column) if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        X, y, dropped = [], [], 0
        for lineno, rec in enumerate(reader, start=2):
            try:
                vals = [float(rec[c]) for c in (*feature_columns, target_column)]
            except (TypeError, ValueError):
                vals = None
            if vals is None or not all(math.isfinite(v) for v in vals):
                dropped += 1
                log.warning("%s:%d: dropping incomplete or non-numeric row", path, lineno)
                continue
            X.append(vals[:-1])
            y.append(vals[-1])
    if dropped:
        log.info("%s: dropped %d of %d rows", path, dropped, dropped + len(y))
    return TablePool(np.array(X, float).reshape(-1, len(feature_columns)), np.array(y, float),
                     tuple(feature_columns), target_column)


# Plausible ranges for the synthetic stand-in (units as in the NIMS fatigue data).
SYNTH_RANGES = {
    "NT": (825.0, 930.0),   # normalizing temperature, deg C
    "CT": (30.0, 930.0),    # carburization temperature, deg C (30 = not carburized)
    "Cr": (0.0, 1.2),       # chromium, wt %
    "QmT": (30.0, 140.0),   # quenching media temperature, deg C
    "DT": (30.0, 903.0),    # diffusion temperature, deg C
    "Ct": (0.0, 540.0),     # carburization time, min
}
SYNTH_NOISE_STD = 15.0


def synth_fatigue_strength(X: np.ndarray) -> np.ndarray:
    """Noise-free synthetic fatigue strength (MPa) from the six standard features.

    With each feature scaled to u in [0, 1] over ``SYNTH_RANGES``::

        FS = 420 + 260 u_CT u_Ct^0.5 + 140 tanh(3 (u_Cr - 0.4))
             - 90 (u_QmT - 0.3)^2 + 60 sin(2 pi u_NT) + 110 u_DT u_CT
    """
    lo = np.array([SYNTH_RANGES[c][0] for c in FATIGUE_FEATURES])
    hi = np.array([SYNTH_RANGES[c][1] for c in FATIGUE_FEATURES])
    u = (np.asarray(X, float) - lo) / (hi - lo)
    nt, ct, cr, qmt, dt, ctime = u.T
    return (420.0 + 260.0 * ct * np.sqrt(np.clip(ctime, 0, None)) + 140.0 * np.tanh(3.0 * (cr - 0.4))
            - 90.0 * (qmt - 0.3) ** 2 + 60.0 * np.sin(2.0 * np.pi * nt) + 110.0 * dt * ct)


def synth_table(n: int = 437, seed: int = 0, noise_std: float = SYNTH_NOISE_STD) -> TablePool:
    """Synthetic stand-in for the fatigue-strength table.

    Features are drawn uniformly over ``SYNTH_RANGES``; the target is
    :func:`synth_fatigue_strength` plus N(0, noise_std**2) noise. Features
    are rounded to 4 decimals and the target to 3.
    """
    rng = np.random.default_rng(seed)
    lo = np.array([SYNTH_RANGES[c][0] for c in FATIGUE_FEATURES])
    hi = np.array([SYNTH_RANGES[c][1] for c in FATIGUE_FEATURES])
    X = lo + rng.random((n, len(lo))) * (hi - lo)
    y = synth_fatigue_strength(X) + rng.normal(0.0, noise_std, n)
    return TablePool(np.round(X, 4), np.round(y, 3))
