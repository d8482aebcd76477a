"""Recompute a summary.json from its trace files and compare.

Deliberately independent of the package: reads the trace CSVs with the
standard library, rebuilds the per-evaluation curves (carrying the last
value forward over verification draws) and recomputes mean and t-based
confidence half-widths with scipy.stats.

    python scripts/recompute_summary.py results/cas [--tol 1e-9]
"""
import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy import stats


def curves_from_trace(path: Path, budget: int) -> dict[str, np.ndarray]:
    out = {m: np.full(budget + 1, np.nan) for m in ("rmse", "crps")}
    used = 0
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            used += int(row["evaluations_used"])
            for m in out:
                out[m][used:] = float(row[f"test_{m}"])
    return out


def stats_of(values: np.ndarray, level: float) -> dict:
    res = {"mean": float(np.mean(values))}
    n = len(values)
    if n >= 2:
        q = stats.t.ppf(0.5 * (1 + level), n - 1)
        res["ci_half_width"] = float(q * np.std(values, ddof=1) / math.sqrt(n))
    return res


def compare(a, b, tol, where="") -> list[str]:
    if isinstance(a, dict):
        errs = [] if set(a) == set(b) else [f"{where}: keys {sorted(a)} != {sorted(b)}"]
        for k in set(a) & set(b):
            errs += compare(a[k], b[k], tol, f"{where}.{k}")
        return errs
    if isinstance(a, list):
        if len(a) != len(b):
            return [f"{where}: length {len(a)} != {len(b)}"]
        return [e for i, (x, y) in enumerate(zip(a, b)) for e in compare(x, y, tol, f"{where}[{i}]")]
    if abs(a - b) > tol:
        return [f"{where}: {a!r} vs {b!r}"]
    return []


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("method_dir", type=Path)
    ap.add_argument("--tol", type=float, default=1e-9)
    args = ap.parse_args(argv)
    summary = json.loads((args.method_dir / "summary.json").read_text())
    budget = summary["config"]["engine"]["budget"]
    level = summary["level"]
    traces = sorted((args.method_dir / "traces").glob("run_*.csv"))
    curves = [curves_from_trace(p, budget) for p in traces]
    mine = {"n_runs": len(traces), "final": {}, "per_iteration": {}}
    for m in ("rmse", "crps"):
        M = np.array([c[m] for c in curves])
        mine["final"][m] = stats_of(M[:, -1], level)
        mine["per_iteration"][m] = [stats_of(M[:, i], level) for i in range(budget + 1)]
    reported = {k: summary[k] for k in mine}
    errors = compare(mine, reported, args.tol)
    for e in errors[:20]:
        print("MISMATCH", e)
    print(f"{len(traces)} traces, {'OK' if not errors else f'{len(errors)} mismatches'}")
    return 1 if errors else 0


if __name__ == "__main__":
    sys.exit(main())
