"""Noisy 1-D demonstration: traces of the surprise loop from the two end points.

    python scripts/demo_1d.py [--n-runs 30] [--out results/demo-1d]

Besides the usual artifacts, writes grid.csv with the posterior mean and
standard deviation after the last iteration of run 0, for plotting.
"""
import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from casmart.cli import main as cli_main
from casmart.engine import EngineConfig, init_run
from casmart.gp import predict
from casmart.objectives import demo_1d, make_objective

ap = argparse.ArgumentParser()
ap.add_argument("--n-runs", default="30")
ap.add_argument("--seed", default="0")
ap.add_argument("--out", default="results/demo-1d")
args = ap.parse_args()
rc = cli_main(["run-benchmark", "--objective", "demo-1d", "--method", "cas", "--n-runs", args.n_runs,
               "--seed", args.seed, "--out", args.out])
if rc:
    sys.exit(rc)

obj = make_objective("demo-1d")
engine = init_run(EngineConfig(n_init=2, budget=12, seed=int(args.seed)), obj, X_init=np.array([[-1.0], [2.0]]))
while not engine.done:
    engine.step(obj)
grid = obj.test_points
pred = predict(engine.model, engine.space.to_unit(grid))
with (Path(args.out) / "grid.csv").open("w", newline="") as fh:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["x", "f_true", "mean", "std"])
    for x, m, s in zip(grid[:, 0], pred.mean, pred.std):
        w.writerow([repr(float(x)), repr(demo_1d(x)), repr(float(m * engine.y_std + engine.y_mean)),
                    repr(float(s * engine.y_std))])
