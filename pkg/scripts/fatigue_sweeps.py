"""Sensitivity sweeps on the fatigue table: initial-set size and sequential budget.

    python scripts/fatigue_sweeps.py [--table data/fatigue.csv] [--method cas]

Emits one summary per sweep point under <out>/<method>/n_init=*/ and budget=*/.
"""
import argparse
import sys

from casmart.cli import main as cli_main

ap = argparse.ArgumentParser()
ap.add_argument("--table", default=None)
ap.add_argument("--method", default="cas")
ap.add_argument("--n-runs", default="30")
ap.add_argument("--out", default="results/fatigue-sweeps")
ap.add_argument("--jobs", default="1")
args = ap.parse_args()
source = ["--objective", args.table] if args.table else ["--synthetic"]
common = [*source, "--method", args.method, "--n-runs", args.n_runs, "--kernel", "matern52",
          "--n-candidates", "350", "--out", args.out, "--jobs", args.jobs, "-v"]
rc = cli_main(["run-dataset", *common, "--budget", "125", "--sweep-n-init", "10,15,20,25,30"])
rc = rc or cli_main(["run-dataset", *common, "--n-init", "25", "--sweep-budget", "25,50,75,100,125"])
sys.exit(rc)
