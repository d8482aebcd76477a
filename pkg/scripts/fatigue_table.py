"""Method comparison on the fatigue-strength table (25 initial, 350 candidates, 125 sequential).

    python scripts/fatigue_table.py --table data/fatigue.csv   # real table with NT, CT, Cr, QmT, DT, Ct, FS
    python scripts/fatigue_table.py                            # synthetic stand-in
"""
import argparse
import sys

from casmart.cli import main as cli_main
from casmart.engine import METHODS

ap = argparse.ArgumentParser()
ap.add_argument("--table", default=None)
ap.add_argument("--n-runs", default="30")
ap.add_argument("--out", default="results/fatigue")
ap.add_argument("--jobs", default="1")
args = ap.parse_args()
source = ["--objective", args.table] if args.table else ["--synthetic"]
sys.exit(cli_main(["compare", *source, "--methods", ",".join(METHODS), "--n-runs", args.n_runs,
                   "--n-init", "25", "--budget", "125", "--n-candidates", "350", "--kernel", "matern52",
                   "--out", args.out, "--jobs", args.jobs, "-v"]))
