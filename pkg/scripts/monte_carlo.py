"""Paired-seed batches: friction adaptation on and off, and the sample-tracking baseline.

Prints the aggregate table and writes per-run and aggregate CSVs.
Both batches together take several minutes on one core; use ``--jobs``.
"""
import argparse
import os
from pathlib import Path

from saa_rti.simulation import SAA_RTI, SAA_RTI_STATIC, SSS_MPC, load_scenario, run_monte_carlo
from saa_rti.simulation.io import write_aggregate, write_rows

ROOT = Path(__file__).resolve().parents[1]


def batch(name, n_runs, strategies, out, jobs):
    base = load_scenario(ROOT / "scenarios" / f"{name}.yaml")
    runs, aggs = run_monte_carlo(base, n_runs, base.seed, strategies, jobs=jobs)
    write_rows(out / f"{name}_runs.csv", ("strategy", "condition", "index", "J_cl", "outcome"),
               [(r.strategy, r.condition, r.index, r.J_cl, r.outcome) for r in runs])
    write_aggregate(out / f"{name}_aggregate.csv", aggs)
    print(f"\n{name}: {n_runs} paired runs per condition")
    print(f"{'condition':<10} {'strategy':<22} {'mean J_cl':>10} {'+/-':>7} {'P_acc':>7}")
    for a in aggs:
        print(f"{a.condition:<10} {a.strategy:<22} {a.J_mean:>10.3f} {a.J_ci:>7.3f} {100 * a.P_acc:>6.1f}%")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/monte_carlo")
    ap.add_argument("--runs", type=int, default=120)
    ap.add_argument("--baseline-runs", type=int, default=100)
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    batch("monte_carlo", args.runs, [SAA_RTI, SAA_RTI_STATIC], out, args.jobs)
    batch("sss_comparison", args.baseline_runs, [SAA_RTI, SSS_MPC], out, args.jobs)


if __name__ == "__main__":
    main()
