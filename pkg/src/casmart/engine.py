"""Sequential surprise-driven sampling loop and acquisition-function baselines.

Surprise modes follow an explore/exploit state machine:

* explore: the staged point is evaluated and scored; an unsurprising
  observation is kept and the next point is chosen by maximin over fresh
  Sobol candidates (or the remaining pool);
* a surprising exploration point triggers a verification draw near it.
  If the verification point is also surprising both are kept and the
  engine switches to exploit mode centred on the verification point;
  otherwise only the verification point is kept;
* in exploit mode each new point is drawn near the latest surprising one,
  until an observation is no longer surprising.

Every objective evaluation, verification draws included, counts against
the budget. ``step`` is implemented on top of ``ask``/``tell`` so an
external evaluator reproduces the same trace.

Random streams
--------------
The run seed feeds ``numpy.random.SeedSequence(seed).spawn(4)``; the
children drive, in order, the Sobol offset of the design, hyperparameter
restarts, perturbation draws and observation noise.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import surprise as sp
from .acquisition import STRATEGIES, AcquisitionStrategy, argmax_acquisition
from .gp import Dataset, GPModel, fit, optimize_hyperparameters, predict
from .kernels import KernelSpec
from .metrics import crps_gaussian, rmse
from .sampling import (PoolExhaustedError, SearchSpace, maximin_next, nearest_available,
                       perturb_unit, sobol_unit)

log = logging.getLogger(__name__)

METHODS = sp.MEASURES + STRATEGIES
SOBOL_OFFSET_RANGE = 4096

INIT = "init"
NO_SURPRISE = "no-surprise-explore"
CONFIRMED = "surprise-confirmed-exploit"
REFUTED = "surprise-refuted-explore"
EXPLOIT_CONTINUE = "exploit-continue"
UNVERIFIED = "surprise-unverified"
BASELINE = "baseline-acquisition"


class ProtocolError(RuntimeError):
    """ask/tell called out of order or with a point that was not asked."""


class BudgetExhausted(RuntimeError):
    pass


@dataclass
class EngineConfig:
    n_init: int = 5
    budget: int = 60
    method: str = "cas"
    credible_level: float = 0.95
    sigma_perturb: float = 0.02
    n_candidates: int = 256
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec.product(KernelSpec.rq(), KernelSpec.constant()))
    restarts: int = 5
    noise_variance: float | None = None
    refit_every: int = 1
    kappa: float = 2.0
    flat_mean: float = 0.0
    flat_std: float = 10.0
    crps_include_noise: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_init < 1 or self.budget < 1:
            raise ValueError("need n_init >= 1 and budget >= 1")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0 < self.credible_level < 1:
            raise ValueError("credible_level must lie in (0, 1)")
        if self.sigma_perturb <= 0 or self.n_candidates < 1 or self.restarts < 1 or self.refit_every < 1:
            raise ValueError("sigma_perturb, n_candidates, restarts and refit_every must be positive")

    @property
    def surprise_mode(self) -> bool:
        return self.method in sp.MEASURES

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kernel"] = self.kernel.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        data = dict(data)
        if isinstance(data.get("kernel"), dict):
            data["kernel"] = KernelSpec.from_dict(data["kernel"])
        return cls(**data)


@dataclass
class IterationRecord:
    iteration: int
    mode: str
    decision: str
    evaluations_used: int
    evaluations_total: int
    x: np.ndarray | None = None
    y: float | None = None
    breakdown: sp.SurpriseBreakdown | None = None
    threshold: float | None = None
    x_perturbed: np.ndarray | None = None
    y_perturbed: float | None = None
    breakdown_perturbed: sp.SurpriseBreakdown | None = None
    threshold_perturbed: float | None = None
    acquisition_score: float | None = None
    test_rmse: float = math.nan
    test_crps: float = math.nan


@dataclass
class RunTrace:
    records: list[IterationRecord]
    budget: int
    seed: int
    method: str

    def curve(self, metric: str) -> np.ndarray:
        """Metric after each number of evaluations 0..budget, carried forward."""
        out = np.full(self.budget + 1, np.nan)
        for rec in self.records:
            out[rec.evaluations_total:] = getattr(rec, f"test_{metric}")
        return out

    @property
    def final_rmse(self) -> float:
        return self.records[-1].test_rmse

    @property
    def final_crps(self) -> float:
        return self.records[-1].test_crps


class Engine:
    """Owns the state of one sequential run.

    Parameters
    ----------
    config : EngineConfig
    space : SearchSpace
        Box or pool the experiments are chosen from.
    test_set : (X, y), optional
        Held-out inputs (original units) and true responses used for the
        RMSE/CRPS columns of the trace.
    """

    def __init__(self, config: EngineConfig, space: SearchSpace, test_set=None):
        self.config = config
        self.space = space
        self.flat = sp.FlatPrior(config.flat_mean, config.flat_std)
        self.strategy = None if config.surprise_mode else AcquisitionStrategy(config.method, config.kappa)
        design_ss, hyper_ss, perturb_ss, noise_ss = np.random.SeedSequence(config.seed).spawn(4)
        self.sobol_base = 1 + int(np.random.default_rng(design_ss).integers(SOBOL_OFFSET_RANGE))
        self.hyper_rng = np.random.default_rng(hyper_ss)
        self.perturb_rng = np.random.default_rng(perturb_ss)
        self.noise_rng = np.random.default_rng(noise_ss)
        if test_set is not None:
            Xt, yt = test_set
            self.test_U = space.to_unit(np.asarray(Xt, float).reshape(len(yt), -1))
            self.test_y = np.asarray(yt, float)
        else:
            self.test_U = self.test_y = None

        self.X: list[np.ndarray] = []
        self.y: list[float] = []
        self.origins: list[str] = []
        self.used: set[int] = set()
        self.model: GPModel | None = None
        self.y_mean, self.y_std = 0.0, 1.0
        self.mode = "explore"
        self.center: np.ndarray | None = None
        self.iteration = 0
        self.evaluations = 0
        self.records: list[IterationRecord] = []
        self.cursor = 0
        self._staged: np.ndarray | None = None
        self._staged_index: int | None = None
        self._staged_kind: str | None = None
        self._pending: dict | None = None
        self._exhausted = False
        self._warned_flat = False

    # -- initial design ----------------------------------------------------

    def initial_design(self) -> np.ndarray:
        """n_init design points in original units (pool rows in pool mode)."""
        n, d = self.config.n_init, self.space.d
        U = sobol_unit(d, n, self.sobol_base)
        if not self.space.is_pool:
            return self.space.from_unit(U)
        eligible = list(self.space.init_indices or self.space.available)
        if n > len(eligible):
            raise ValueError(f"n_init={n} exceeds the {len(eligible)} pool rows eligible for the design")
        P = self.space.to_unit(self.space.points[eligible])
        chosen = []
        for u in U:
            dist = np.sum((P - u) ** 2, axis=1)
            dist[chosen] = np.inf
            chosen.append(int(np.argmin(dist)))
        self._init_indices = [eligible[i] for i in chosen]
        return self.space.points[self._init_indices]

    def initialize(self, X_init, y_init) -> IterationRecord:
        X_init = np.asarray(X_init, float).reshape(len(y_init), -1)
        y_init = np.asarray(y_init, float)
        if not np.all(np.isfinite(y_init)):
            raise ValueError("initial responses must be finite")
        if self.model is not None:
            raise ProtocolError("engine already initialized")
        for x, yv in zip(X_init, y_init):
            self.X.append(self.space.to_unit(x))
            self.y.append(float(yv))
            self.origins.append("init")
        if self.space.is_pool:
            idx = getattr(self, "_init_indices", None)
            if idx is None:
                idx = [self._pool_index(x) for x in X_init]
            self.used.update(idx)
        self.cursor = self.sobol_base + self.config.n_init
        self._refit()
        rec = self._finish(IterationRecord(0, "explore", INIT, 0, 0))
        if self.config.surprise_mode:
            self._stage_first()
        else:
            self._stage_acquisition()
        return rec

    # -- ask / tell --------------------------------------------------------

    @property
    def done(self) -> bool:
        return self.evaluations >= self.config.budget or self._exhausted

    def ask(self) -> np.ndarray:
        if self.model is None:
            raise ProtocolError("initialize the engine before asking")
        if self.done:
            raise BudgetExhausted(f"budget of {self.config.budget} evaluations used")
        if self.space.is_pool:
            return self.space.points[self._staged_index].copy()
        return self.space.from_unit(self._staged)

    def tell(self, x, y: float) -> IterationRecord | None:
        """Report the response at the last asked point.

        Returns the iteration record once the iteration completes, or None
        while a verification draw is still pending.
        """
        if self.done:
            raise BudgetExhausted(f"budget of {self.config.budget} evaluations used")
        x = np.asarray(x, float).reshape(-1)
        if x.shape != (self.space.d,) or np.max(np.abs(self.space.to_unit(x) - self._staged)) > 1e-12:
            raise ProtocolError(f"told point {x} does not match the asked point {self.ask()}")
        y = float(y)
        if not math.isfinite(y):
            raise ValueError(f"observation must be finite, got {y}")
        u, idx, kind = self._staged, self._staged_index, self._staged_kind
        self.evaluations += 1
        if idx is not None:
            self.used.add(idx)
        if kind == "acquisition":
            return self._tell_acquisition(u, y)
        if kind == "verify":
            return self._tell_verification(u, y)
        return self._tell_surprise(u, y, kind)

    def step(self, objective, rng: np.random.Generator | None = None) -> IterationRecord:
        """Evaluate ``objective`` until one iteration completes."""
        rng = self.noise_rng if rng is None else rng
        while True:
            x = self.ask()
            rec = self.tell(x, objective(x, rng))
            if rec is not None:
                return rec

    def trace(self) -> RunTrace:
        return RunTrace(list(self.records), self.config.budget, self.config.seed, self.config.method)

    # -- decision logic ------------------------------------------------------

    def _score(self, u, y):
        ys = (y - self.y_mean) / self.y_std
        b, k, flag = sp.evaluate(self.model, u, ys, self.flat, self.config.credible_level, self.config.method)
        return b, k, flag

    def _tell_surprise(self, u, y, kind):
        b, k, flag = self._score(u, y)
        rec = IterationRecord(self.iteration + 1, "", "", 1, self.evaluations,
                              self.space.from_unit(u), y, b, k)
        if kind == "exploit":
            self._add(u, y, "exploit-continue")
            if flag:
                rec.decision = EXPLOIT_CONTINUE
                return self._complete(rec, "exploit", u)
            rec.decision = NO_SURPRISE
            return self._complete(rec, "explore")
        if not flag:
            self._add(u, y, "explore")
            rec.decision = NO_SURPRISE
            return self._complete(rec, "explore")
        if self.done or not self._stage_perturbation(u, "verify"):
            self._add(u, y, "explore")
            rec.decision = UNVERIFIED
            return self._complete(rec, "explore")
        self._pending = {"record": rec, "u": u, "y": y}
        return None

    def _tell_verification(self, u, y):
        pending, self._pending = self._pending, None
        rec: IterationRecord = pending["record"]
        b, k, flag = self._score(u, y)
        rec.evaluations_used = 2
        rec.evaluations_total = self.evaluations
        rec.x_perturbed, rec.y_perturbed = self.space.from_unit(u), y
        rec.breakdown_perturbed, rec.threshold_perturbed = b, k
        if flag:
            self._add(pending["u"], pending["y"], "explore")
            self._add(u, y, "exploit-verify")
            rec.decision = CONFIRMED
            return self._complete(rec, "exploit", u)
        self._add(u, y, "exploit-verify")
        rec.decision = REFUTED
        return self._complete(rec, "explore")

    def _tell_acquisition(self, u, y):
        rec = IterationRecord(self.iteration + 1, "explore", BASELINE, 1, self.evaluations,
                              self.space.from_unit(u), y, acquisition_score=self._staged_score)
        self._add(u, y, "acquisition")
        self.iteration += 1
        self._refit()
        rec = self._finish(rec)
        if not self.done:
            self._stage_acquisition()
        return rec

    def _complete(self, rec: IterationRecord, mode: str, center=None) -> IterationRecord:
        self.mode, self.center = mode, (None if center is None else np.array(center))
        rec.mode = mode
        self.iteration += 1
        self._refit()
        rec = self._finish(rec)
        if not self.done:
            if mode == "exploit":
                if not self._stage_perturbation(self.center, "exploit"):
                    self._exhausted = True
            else:
                self._stage_explore()
        return rec

    # -- staging -------------------------------------------------------------

    def _set_stage(self, u, index, kind):
        self._staged = np.asarray(u, float)
        self._staged_index = index
        self._staged_kind = kind

    def _available(self) -> list[int]:
        return [i for i in self.space.available if i not in self.used]

    def _stage_first(self):
        u = sobol_unit(self.space.d, 1, self.cursor)[0]
        self.cursor += 1
        if self.space.is_pool:
            try:
                i = nearest_available(self.space, u, self.used)
            except PoolExhaustedError:
                self._exhausted = True
                return
            self._set_stage(self.space.to_unit(self.space.points[i]), i, "explore")
        else:
            self._set_stage(u, None, "explore")

    def _candidates(self):
        if self.space.is_pool:
            idx = self._available()
            return self.space.to_unit(self.space.points[idx]), idx
        U = sobol_unit(self.space.d, self.config.n_candidates, self.cursor)
        self.cursor += self.config.n_candidates
        return U, None

    def _stage_explore(self):
        U, idx = self._candidates()
        if len(U) == 0:
            self._exhausted = True
            return
        i = maximin_next(U, np.array(self.X))
        self._set_stage(U[i], None if idx is None else idx[i], "explore")

    def _stage_perturbation(self, center_u, kind) -> bool:
        if not self.space.is_pool:
            self._set_stage(perturb_unit(center_u, self.config.sigma_perturb, self.perturb_rng), None, kind)
            return True
        step = center_u + self.perturb_rng.normal(0.0, self.config.sigma_perturb, size=center_u.shape)
        try:
            i = nearest_available(self.space, step, self.used)
        except PoolExhaustedError:
            return False
        self._set_stage(self.space.to_unit(self.space.points[i]), i, kind)
        return True

    def _stage_acquisition(self):
        U, idx = self._candidates()
        if len(U) == 0:
            self._exhausted = True
            return
        f_best = float(np.max(self._standardized()))
        i, _, s = argmax_acquisition(self.model, U, self.strategy, f_best)
        self._staged_score = s
        self._set_stage(U[i], None if idx is None else idx[i], "acquisition")

    # -- model ---------------------------------------------------------------

    def _pool_index(self, x) -> int:
        hits = np.flatnonzero(np.all(self.space.points == np.asarray(x, float), axis=1))
        if len(hits) == 0:
            raise ValueError(f"point {x} is not in the pool")
        return int(hits[0])

    def _add(self, u, y, origin):
        self.X.append(np.array(u, float))
        self.y.append(float(y))
        self.origins.append(origin)

    def _standardized(self) -> np.ndarray:
        return (np.array(self.y) - self.y_mean) / self.y_std

    def _refit(self):
        y = np.array(self.y)
        self.y_mean = float(y.mean())
        std = float(y.std())
        self.y_std = std if std > 1e-12 else 1.0
        data = Dataset(np.array(self.X), self._standardized())
        cfg = self.config
        refit = self.model is None or self.iteration % cfg.refit_every == 0
        if data.n < 2:
            self.model = fit(data, cfg.kernel, 1e-6 if cfg.noise_variance is None else cfg.noise_variance)
        elif refit:
            seed = int(self.hyper_rng.integers(2**63))
            self.model = optimize_hyperparameters(data, cfg.kernel, cfg.restarts, seed,
                                                  noise_variance=cfg.noise_variance, warm_start=self.model)
        else:
            self.model = fit(data, self.model.kernel, self.model.noise_variance)
        if not self._warned_flat and not self.flat.dominates(math.sqrt(self.model.kernel.prior_variance())):
            log.debug("flat prior std %.3g is below the fitted prior std %.3g",
                        self.flat.std, math.sqrt(self.model.kernel.prior_variance()))
            self._warned_flat = True

    def _finish(self, rec: IterationRecord) -> IterationRecord:
        if self.test_U is not None:
            pred = predict(self.model, self.test_U)
            mean = pred.mean * self.y_std + self.y_mean
            var = pred.var + (self.model.noise_variance if self.config.crps_include_noise else 0.0)
            std = np.sqrt(var) * self.y_std
            rec.test_rmse = rmse(mean, self.test_y)
            rec.test_crps = float(np.mean(crps_gaussian(mean, std, self.test_y)))
        self.records.append(rec)
        return rec

    @property
    def training_X(self) -> np.ndarray:
        """Training inputs in original units."""
        return self.space.from_unit(np.array(self.X))


def init_run(config: EngineConfig, objective, space: SearchSpace | None = None, test_set=None,
             X_init=None) -> Engine:
    """Build an engine, evaluate the initial design and fit the first model."""
    space = objective.space if space is None else space
    if test_set is None and getattr(objective, "test_points", None) is not None:
        test_set = objective.test_set()
    engine = Engine(config, space, test_set)
    X0 = engine.initial_design() if X_init is None else np.asarray(X_init, float).reshape(-1, space.d)
    if X_init is not None and len(X0) != config.n_init:
        raise ValueError(f"explicit initial design has {len(X0)} points, config says n_init={config.n_init}")
    try:
        y0 = [objective(x, engine.noise_rng) for x in X0]
    except Exception as exc:
        raise RuntimeError(f"objective failed on the initial design: {exc}") from exc
    engine.initialize(X0, y0)
    return engine


def run(config: EngineConfig, objective, space: SearchSpace | None = None, test_set=None,
        X_init=None, on_record=None) -> RunTrace:
    engine = init_run(config, objective, space, test_set, X_init)
    if on_record is not None:
        on_record(engine.records[0])
    while not engine.done:
        rec = engine.step(objective)
        if on_record is not None:
            on_record(rec)
    return engine.trace()
