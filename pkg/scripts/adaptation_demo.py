"""Dry and wet curve scenarios with and without friction adaptation.

Writes traces and figures to ``--out`` and prints closed-loop cost,
front-force discrepancy and peak side-slip for each run.
"""
import argparse
from pathlib import Path

from saa_rti.plotting import plot_compare, plot_run
from saa_rti.simulation import SAA_RTI, SAA_RTI_STATIC, load_scenario, run_closed_loop

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/adaptation")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("dry_curve", "wet_curve"):
        scn = load_scenario(ROOT / "scenarios" / f"{name}.yaml")
        obstacles = [ob for ob, _ in scn.obstacle_list()]
        traces = []
        for strategy in (SAA_RTI, SAA_RTI_STATIC):
            trace = out / f"{name}_{strategy}.csv"
            res = run_closed_loop(scn, strategy, trace_path=trace)
            plot_run(trace, scn.centerline(), obstacles, scn.vehicle, out)
            traces.append(trace)
            print(f"{name:<10} {strategy:<20} {res.outcome:<13} J_cl={res.J_cl:8.3f}  "
                  f"force discrepancy={res.rms_front_discrepancy:7.1f} N  peak side-slip={res.peak_sideslip:.4f} rad")
        plot_compare(*traces, scn.centerline(), obstacles, out / f"{name}_compare.svg",
                     labels=("adaptive", "non-adaptive"))


if __name__ == "__main__":
    main()
