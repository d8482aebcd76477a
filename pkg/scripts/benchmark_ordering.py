"""All seven methods on a benchmark under shared seeds (Six-Hump by default).

    python scripts/benchmark_ordering.py [--objective griewank] [--n-runs 30] [--out results/six-hump]

Writes per-method traces, summaries and a comparison table; the curves.csv
files hold the per-evaluation RMSE/CRPS behind the convergence plots and
final.csv the per-run values behind the box plots.
"""
import argparse
import sys

from casmart.cli import main as cli_main
from casmart.engine import METHODS

ap = argparse.ArgumentParser()
ap.add_argument("--objective", default="six-hump")
ap.add_argument("--n-runs", default="30")
ap.add_argument("--out", default=None)
ap.add_argument("--jobs", default="1")
args = ap.parse_args()
sys.exit(cli_main(["compare", "--objective", args.objective, "--methods", ",".join(METHODS),
                   "--n-runs", args.n_runs, "--out", args.out or f"results/{args.objective}",
                   "--jobs", args.jobs, "-v"]))
