"""Two local optima around one obstacle: both converged branches against the proposed controller."""
import argparse
from pathlib import Path

from saa_rti.plotting import plot_compare
from saa_rti.simulation import SAA_RTI, SQP_LEFT, SQP_RIGHT, load_scenario, run_closed_loop

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/bifurcation")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scn = load_scenario(ROOT / "scenarios" / "bifurcation.yaml")
    traces = {}
    for strategy in (SQP_LEFT, SQP_RIGHT, SAA_RTI):
        traces[strategy] = out / f"bifurcation_{strategy}.csv"
        res = run_closed_loop(scn, strategy, trace_path=traces[strategy])
        print(f"{strategy:<18} {res.outcome:<12} J_cl={res.J_cl:.4f}")
    obstacles = [ob for ob, _ in scn.obstacle_list()]
    for branch in (SQP_LEFT, SQP_RIGHT):
        plot_compare(traces[branch], traces[SAA_RTI], scn.centerline(), obstacles,
                     out / f"bifurcation_{branch}_vs_{SAA_RTI}.svg", labels=(branch, SAA_RTI))


if __name__ == "__main__":
    main()
