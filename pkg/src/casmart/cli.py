"""Command-line experiment harness.

Subcommands
-----------
run-benchmark  seeded replications on a closed-form objective
run-dataset    pool-based replications on a table (or a synthetic stand-in)
compare        several methods under identical seeds, tabulated

Configuration
-------------
``--config`` takes a JSON file; command-line flags override its values,
which override the built-in defaults. Recognized keys::

    {
      "objective": "six-hump",          # or a table path for run-dataset
      "method": "cas",                  # run-benchmark / run-dataset
      "methods": ["cas", "ei", "pi"],   # compare
      "n_runs": 30,
      "base_seed": 0,
      "out": "results",
      "synthetic": false,
      "n_candidates": 350,              # pool candidates (datasets)
      "sweep_n_init": [10, 15, 20],     # datasets, optional
      "sweep_budget": [25, 50, 75],     # datasets, optional
      "engine": {<EngineConfig fields>, "kernel": "rq*const" or a kernel dict}
    }

Run ``i`` uses seed ``base_seed + i``. The engine splits it into four
streams (design offset, hyperparameter restarts, perturbation, noise); the
dataset split uses a fifth child of the same ``SeedSequence``.

Output layout (one directory per method, and per sweep point)::

    <out>/<method>/traces/run_000.csv   one row per engine iteration
    <out>/<method>/summary.json         per-evaluation mean +/- CI, final stats
    <out>/<method>/final.csv            final RMSE/CRPS per run (box plots)
    <out>/<method>/curves.csv           long format: run_id, evaluation, metric, value
    <out>/comparison.csv, comparison.txt (compare only)

Trace columns are ``run_id, iteration, mode, decision, evaluations_used,
x1..xd, y, shannon, bayesian_flat, confidence_C, adjustment_A, cas,
threshold, test_rmse, test_crps`` followed by the verification-draw columns
``bayesian, xp1..xpd, y_perturbed, cas_perturbed, threshold_perturbed``.
Surprise columns are left empty for acquisition baselines; ``x``/``y`` are
empty on the iteration-0 row.

Summary JSON keys (sorted): ``config``, ``final`` (``rmse``/``crps`` each
with ``mean`` and, for n_runs >= 2, ``ci_half_width``), ``level``,
``n_runs``, ``per_iteration`` (lists of the same stats indexed by the
number of evaluations used, 0..budget), ``schema``.

Exit codes: 0 success, 1 runtime or IO failure, 2 usage or configuration
error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .engine import METHODS, EngineConfig, IterationRecord, RunTrace, init_run
from .kernels import KernelError, KernelSpec, parse_kernel
from .metrics import MetricSummary, mean_ci
from .objectives import CapacityError, SchemaError, TablePool, load_table, make_objective, synth_table

log = logging.getLogger("casmart")

SUMMARY_SCHEMA = "casmart.summary/1"
BENCHMARKS = ("six-hump", "griewank", "demo-1d")
SURPRISE_COLUMNS = ("shannon", "bayesian_flat", "confidence_C", "adjustment_A", "cas")
DEMO_INIT = ((-1.0,), (2.0,))

BENCHMARK_DEFAULTS = {
    "six-hump": {"n_init": 5, "budget": 60},
    "griewank": {"n_init": 5, "budget": 60},
    "demo-1d": {"n_init": 2, "budget": 12},
}
DATASET_DEFAULTS = {"n_init": 25, "budget": 125, "kernel": "matern52"}


class UsageError(ValueError):
    """Bad flags or configuration (exit code 2)."""


@dataclass
class ExperimentConfig:
    objective: str
    method: str = "cas"
    engine: EngineConfig = field(default_factory=EngineConfig)
    n_runs: int = 1
    base_seed: int = 0
    output_dir: Path = Path("results")
    synthetic: bool = False
    n_candidates: int = 350
    methods: tuple[str, ...] = ()
    sweep_n_init: tuple[int, ...] = ()
    sweep_budget: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_runs < 1:
            raise UsageError("n_runs must be >= 1")
        for m in (self.method, *self.methods):
            if m not in METHODS:
                raise UsageError(f"unknown method {m!r}; expected one of {', '.join(METHODS)}")

    def describe(self) -> dict:
        """Config as written into summaries; the output path is left out so
        identical experiments produce identical files wherever they are written."""
        return {
            "objective": self.objective,
            "method": self.method,
            "n_runs": self.n_runs,
            "base_seed": self.base_seed,
            "synthetic": self.synthetic,
            "n_candidates": self.n_candidates,
            "engine": self.engine.to_dict(),
        }


# -- objectives and runs -------------------------------------------------------


def _dataset_table(cfg: ExperimentConfig) -> TablePool:
    if cfg.synthetic:
        return synth_table()
    path = Path(cfg.objective)
    if not path.is_file():
        raise FileNotFoundError(f"table {path} not found (use --synthetic for the stand-in)")
    return load_table(path)


def run_replication(cfg: ExperimentConfig, kind: str, run_id: int) -> tuple[RunTrace, list[list[str]], int]:
    """Run replication ``run_id`` (seed ``base_seed + run_id``); returns the trace,
    its CSV rows and the input dimension. ``kind`` is "benchmark" or "dataset"."""
    seed = cfg.base_seed + run_id
    engine_cfg = EngineConfig.from_dict({**cfg.engine.to_dict(), "seed": seed})
    X_init = None
    if kind == "benchmark":
        objective = make_objective(cfg.objective)
        space = objective.space
        if objective.name == "demo-1d" and engine_cfg.n_init == len(DEMO_INIT):
            X_init = np.array(DEMO_INIT)
    else:
        table = _dataset_table(cfg)
        split_seed = np.random.SeedSequence(seed).spawn(5)[4]
        table.split(engine_cfg.n_init, cfg.n_candidates, split_seed)
        objective = table.objective()
        space = objective.space
    rows: list[list[str]] = []
    d = space.d
    engine = init_run(engine_cfg, objective, space, X_init=X_init)
    rows.append(trace_row(run_id, engine.records[0], d, engine_cfg.surprise_mode))
    while not engine.done:
        rows.append(trace_row(run_id, engine.step(objective), d, engine_cfg.surprise_mode))
    return engine.trace(), rows, d


def _run_task(args):
    return run_replication(*args)


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def trace_header(d: int) -> list[str]:
    return (["run_id", "iteration", "mode", "decision", "evaluations_used"]
            + [f"x{i + 1}" for i in range(d)]
            + ["y", *SURPRISE_COLUMNS, "threshold", "test_rmse", "test_crps", "bayesian"]
            + [f"xp{i + 1}" for i in range(d)]
            + ["y_perturbed", "cas_perturbed", "threshold_perturbed"])


def trace_row(run_id: int, rec: IterationRecord, d: int, surprise_mode: bool) -> list[str]:
    x = [""] * d if rec.x is None else [_fmt(v) for v in rec.x]
    xp = [""] * d if rec.x_perturbed is None else [_fmt(v) for v in rec.x_perturbed]
    b = rec.breakdown
    if surprise_mode and b is not None:
        surprise = [_fmt(b.shannon), _fmt(b.bayesian_flat), _fmt(b.confidence_correction),
                    _fmt(b.adjustment), _fmt(b.cas)]
        bayes = _fmt(b.bayesian)
    else:
        surprise, bayes = [""] * len(SURPRISE_COLUMNS), ""
    bp = rec.breakdown_perturbed
    return ([str(run_id), str(rec.iteration), rec.mode, rec.decision, str(rec.evaluations_used)]
            + x + [_fmt(rec.y), *surprise, _fmt(rec.threshold), _fmt(rec.test_rmse), _fmt(rec.test_crps), bayes]
            + xp + [_fmt(rec.y_perturbed), "" if bp is None else _fmt(bp.cas), _fmt(rec.threshold_perturbed)])


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_experiment(cfg: ExperimentConfig, kind: str, out: Path, jobs: int = 1) -> MetricSummary:
    """Run ``cfg.n_runs`` replications of ``cfg.method`` and write all artifacts to ``out``."""
    traces_dir = out / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, kind, i) for i in range(cfg.n_runs)]
    if jobs > 1 and cfg.n_runs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = []
        for t in tasks:
            results.append(run_replication(*t))
            log.info("%s run %d/%d done", cfg.method, t[2] + 1, cfg.n_runs)
    traces = []
    for i, (trace, rows, d) in enumerate(results):
        _write_csv(traces_dir / f"run_{i:03d}.csv", trace_header(d), rows)
        traces.append(trace)
    summary = MetricSummary(np.array([t.curve("rmse") for t in traces]),
                            np.array([t.curve("crps") for t in traces]))
    write_summary(out / "summary.json", summary, cfg.describe())
    _write_csv(out / "final.csv", ["run_id", "seed", "final_rmse", "final_crps"],
               [[str(i), str(cfg.base_seed + i), _fmt(t.final_rmse), _fmt(t.final_crps)]
                for i, t in enumerate(traces)])
    curve_rows = []
    for i in range(summary.n_runs):
        for metric, curves in (("rmse", summary.rmse_curves), ("crps", summary.crps_curves)):
            curve_rows.extend([str(i), str(e), metric, _fmt(v)] for e, v in enumerate(curves[i]))
    _write_csv(out / "curves.csv", ["run_id", "evaluation", "metric", "value"], curve_rows)
    return summary


def write_summary(path: Path, summary: MetricSummary, config: dict) -> None:
    body = summary.to_dict()
    body["config"] = config
    body["schema"] = SUMMARY_SCHEMA
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_comparison(out: Path, summaries: dict[str, MetricSummary], level: float = 0.95) -> str:
    rows, lines = [], []
    header = ["method", "n_runs", "rmse_mean", "rmse_ci_half_width", "crps_mean", "crps_ci_half_width"]
    for method, s in summaries.items():
        row = [method, str(s.n_runs)]
        for values in (s.final_rmse, s.final_crps):
            if s.n_runs >= 2:
                m, h = mean_ci(values, level)
                row += [_fmt(m), _fmt(h)]
            else:
                row += [_fmt(float(np.mean(values))), ""]
        rows.append(row)
    _write_csv(out / "comparison.csv", header, rows)
    pct = f"{100 * level:g}%"
    lines.append(f"Final-iteration test error, mean +/- {pct} CI (original response units)")
    lines.append(f"{'method':<10}{'RMSE':>24}{'CRPS':>24}")
    for row in rows:
        cells = [f"{float(row[i]):.4f}" + (f" +/- {float(row[i + 1]):.4f}" if row[i + 1] else "")
                 for i in (2, 4)]
        lines.append(f"{row[0]:<10}{cells[0]:>24}{cells[1]:>24}")
    text = "\n".join(lines) + "\n"
    (out / "comparison.txt").write_text(text, encoding="utf-8")
    return text


# -- argument handling ---------------------------------------------------------


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _method_list(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--objective", help="benchmark name or table path")
    common.add_argument("--n-runs", type=int)
    common.add_argument("--budget", type=int)
    common.add_argument("--n-init", type=int)
    common.add_argument("--seed", type=int, help="base seed; run i uses seed + i")
    common.add_argument("--out", help="output directory")
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--synthetic", action="store_true", default=None,
                        help="use the synthetic fatigue table instead of a file")
    common.add_argument("--sigma-perturb", type=float)
    common.add_argument("--credible-level", type=float)
    common.add_argument("--kernel", help="kernel name, e.g. rq*const, matern52, rbf")
    common.add_argument("--n-candidates", type=int, help="candidate pool size for datasets")
    common.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="casmart", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run-benchmark", "run-dataset"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--method", help=f"one of {', '.join(METHODS)}")
    sub.choices["run-dataset"].add_argument("--sweep-n-init", type=_int_list)
    sub.choices["run-dataset"].add_argument("--sweep-budget", type=_int_list)
    p = sub.add_parser("compare", parents=[common])
    p.add_argument("--methods", type=_method_list, help="comma-separated method list")
    return parser


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path}: top level must be an object")
    return data


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults, the config file and command-line flags (in that order)."""
    file_cfg = _load_config_file(args.config)
    engine_file = dict(file_cfg.pop("engine", {}) or {})

    def pick(flag, key, default=None):
        value = getattr(args, flag, None)
        return value if value is not None else file_cfg.get(key, default)

    dataset = args.command == "run-dataset" or (
        args.command == "compare" and (pick("synthetic", "synthetic", False)
                                       or pick("objective", "objective", "") not in BENCHMARKS))
    objective = pick("objective", "objective")
    synthetic = bool(pick("synthetic", "synthetic", False))
    if objective is None:
        if dataset and synthetic:
            objective = "synthetic"
        else:
            raise UsageError("--objective is required")
    if not dataset and objective not in BENCHMARKS:
        raise UsageError(f"unknown objective {objective!r}; expected one of {', '.join(BENCHMARKS)}")

    defaults = dict(DATASET_DEFAULTS if dataset else BENCHMARK_DEFAULTS[objective])
    engine = {**defaults, **engine_file}
    for flag, key in (("budget", "budget"), ("n_init", "n_init"), ("sigma_perturb", "sigma_perturb"),
                      ("credible_level", "credible_level"), ("kernel", "kernel")):
        value = getattr(args, flag, None)
        if value is not None:
            engine[key] = value
    method = pick("method", "method", "cas")
    engine["method"] = method
    kernel = engine.get("kernel")
    try:
        if isinstance(kernel, str):
            engine["kernel"] = parse_kernel(kernel)
        elif isinstance(kernel, dict):
            engine["kernel"] = KernelSpec.from_dict(kernel)
        known = {f.name for f in fields(EngineConfig)}
        unknown = sorted(set(engine) - known)
        if unknown:
            raise UsageError(f"unknown engine settings {unknown}")
        engine_cfg = EngineConfig(**engine)
    except (KernelError, TypeError, ValueError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(str(exc)) from None

    methods = tuple(pick("methods", "methods", ()) or ())
    if args.command == "compare" and len(methods) < 2:
        raise UsageError("compare needs at least two methods (--methods cas,ei,...)")
    return ExperimentConfig(
        objective=objective,
        method=method,
        engine=engine_cfg,
        n_runs=int(pick("n_runs", "n_runs", 1)),
        base_seed=int(pick("seed", "base_seed", 0)),
        output_dir=Path(pick("out", "out", "results")),
        synthetic=synthetic,
        n_candidates=int(pick("n_candidates", "n_candidates", 350)),
        methods=methods,
        sweep_n_init=tuple(pick("sweep_n_init", "sweep_n_init", ()) or ()),
        sweep_budget=tuple(pick("sweep_budget", "sweep_budget", ()) or ()),
    )


def _with_engine(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    engine = EngineConfig.from_dict({**cfg.engine.to_dict(), **changes})
    return ExperimentConfig(**{**cfg.__dict__, "engine": engine,
                               "method": changes.get("method", cfg.method)})


def cmd_run_benchmark(cfg: ExperimentConfig, jobs: int = 1) -> None:
    run_experiment(cfg, "benchmark", cfg.output_dir / cfg.method, jobs)


def cmd_run_dataset(cfg: ExperimentConfig, jobs: int = 1) -> None:
    _check_capacity(cfg)
    points = [(f"n_init={n}", {"n_init": n}) for n in cfg.sweep_n_init]
    points += [(f"budget={b}", {"budget": b}) for b in cfg.sweep_budget]
    if not points:
        run_experiment(cfg, "dataset", cfg.output_dir / cfg.method, jobs)
        return
    for label, change in points:
        sub = _with_engine(cfg, **change)
        _check_capacity(sub)
        run_experiment(sub, "dataset", cfg.output_dir / cfg.method / label, jobs)


def cmd_compare(cfg: ExperimentConfig, jobs: int = 1) -> str:
    kind = "benchmark" if cfg.objective in BENCHMARKS and not cfg.synthetic else "dataset"
    if kind == "dataset":
        _check_capacity(cfg)
    summaries = {}
    for method in cfg.methods:
        sub = _with_engine(cfg, method=method)
        summaries[method] = run_experiment(sub, kind, cfg.output_dir / method, jobs)
    return write_comparison(cfg.output_dir, summaries)


def _check_capacity(cfg: ExperimentConfig) -> None:
    """Fail before any run if the table cannot hold the requested splits."""
    table = _dataset_table(cfg)
    e = cfg.engine
    if e.n_init + cfg.n_candidates >= table.n:
        raise CapacityError(f"table has {table.n} rows; {e.n_init} initial + {cfg.n_candidates} "
                            "candidates leaves no test rows")
    if e.budget > cfg.n_candidates:
        raise CapacityError(f"budget {e.budget} exceeds the {cfg.n_candidates} pool candidates")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "run-benchmark":
            cmd_run_benchmark(cfg, args.jobs)
        elif args.command == "run-dataset":
            cmd_run_dataset(cfg, args.jobs)
        else:
            print(cmd_compare(cfg, args.jobs), end="")
    except (UsageError, SchemaError, CapacityError) as exc:
        print(f"casmart: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"casmart: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
