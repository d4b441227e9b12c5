"""Command-line front end: ``saa-rti {run,batch,compare,validate}``.

Exit codes: 0 ok, 2 configuration or input error, 10 the run ended in an accident.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .simulation import STRATEGIES, Scenario, ScenarioError, load_scenario, run_closed_loop, run_monte_carlo
from .simulation.io import SchemaError, read_trace, write_aggregate, write_rows

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ACCIDENT = 10
OUT_ENV = "SAA_RTI_OUT"


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scenario(args) -> Scenario:
    scn = load_scenario(args.scenario)
    if getattr(args, "seed", None) is not None:
        scn = scn.replace(seed=args.seed)
    return scn


def _plot_run(trace: Path, scn: Scenario, out: Path):
    from .plotting import plot_run
    obstacles = [ob for ob, _ in scn.obstacle_list()]
    return plot_run(trace, scn.centerline(), obstacles, scn.vehicle, out)


def cmd_run(args) -> int:
    scn = _scenario(args)
    out = _out_dir(args)
    trace = out / f"{scn.name}_{args.strategy}.csv"
    cand = out / f"{scn.name}_{args.strategy}_candidates.csv" if args.dump_candidates else None
    qp_dir = out / f"{scn.name}_{args.strategy}_qp" if args.dump_qp else None
    if cand is not None and cand.exists():
        cand.unlink()
    res = run_closed_loop(scn, args.strategy, trace_path=trace, timing=args.timing,
                          dump_candidates_to=cand, dump_qp_to=qp_dir)
    print(f"{scn.name} {args.strategy}: outcome={res.outcome} J_cl={res.J_cl:.6g} cycles={len(res.cycles)} "
          f"rms_front_discrepancy={res.rms_front_discrepancy:.6g} peak_sideslip={res.peak_sideslip:.6g}")
    if args.timing:
        times = [r[18] for r in res.trace]
        print(f"median cycle time {np.median(times):.3f} ms")
    print(f"trace: {trace}")
    if args.plot:
        for p in _plot_run(trace, scn, out):
            print(f"plot: {p}")
    return EXIT_ACCIDENT if res.accident else EXIT_OK


def cmd_batch(args) -> int:
    if args.runs < 1:
        raise ScenarioError("--runs must be at least 1")
    scn = _scenario(args)
    out = _out_dir(args)
    strategies = args.strategy or ["saa-rti", "saa-rti-nonadaptive"]
    runs, aggs = run_monte_carlo(scn, args.runs, scn.seed, strategies, jobs=args.jobs)
    write_rows(out / f"{scn.name}_runs.csv", ("strategy", "condition", "index", "J_cl", "outcome"),
               [(r.strategy, r.condition, r.index, r.J_cl, r.outcome) for r in runs])
    agg_path = out / f"{scn.name}_aggregate.csv"
    write_aggregate(agg_path, aggs)
    print(f"{'condition':<10} {'strategy':<22} {'n':>4} {'J_cl mean':>12} {'P_acc':>8}")
    for a in aggs:
        print(f"{a.condition:<10} {a.strategy:<22} {a.n:>4} {a.J_mean:>12.4f} {100 * a.P_acc:>7.1f}%")
    print(f"aggregate: {agg_path}")
    return EXIT_OK


def compare_traces(trace_a, trace_b) -> dict:
    """Closed-loop cost of each trace over their common cycles and the relative change from a to b."""
    ta, tb = read_trace(trace_a), read_trace(trace_b)
    n = min(len(ta["t"]), len(tb["t"]))
    Ja = float(np.sum(ta["J_step"][:n]))
    Jb = float(np.sum(tb["J_step"][:n]))
    delta = Jb - Ja
    pct = 100.0 * delta / Ja if Ja != 0 else (0.0 if delta == 0 else float("inf"))
    return {"J_a": Ja, "J_b": Jb, "delta": delta, "percent": pct, "common": n,
            "truncated": len(ta["t"]) != len(tb["t"]), "len_a": len(ta["t"]), "len_b": len(tb["t"])}


def cmd_compare(args) -> int:
    rep = compare_traces(args.trace_a, args.trace_b)
    if rep["truncated"]:
        print(f"note: traces differ in length ({rep['len_a']} vs {rep['len_b']} cycles); "
              f"compared over the first {rep['common']}")
    print(f"J_cl a={rep['J_a']:.6g} b={rep['J_b']:.6g} delta={rep['delta']:+.6g} ({rep['percent']:+.2f}%)")
    if args.plot:
        if not args.scenario:
            raise ScenarioError("--plot for compare needs --scenario for the road geometry")
        from .plotting import plot_compare
        scn = _scenario(args)
        out = _out_dir(args)
        path = plot_compare(args.trace_a, args.trace_b, scn.centerline(), [ob for ob, _ in scn.obstacle_list()],
                            out / f"compare_{Path(args.trace_a).stem}_{Path(args.trace_b).stem}.svg",
                            labels=(Path(args.trace_a).stem, Path(args.trace_b).stem))
        print(f"plot: {path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    scn = _scenario(args)
    print(f"{args.scenario}: ok ({scn.name}, road={scn.road.kind}, obstacles={len(scn.obstacles)}, "
          f"duration={scn.duration} s)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="saa-rti", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scenario_required=True):
        p.add_argument("--scenario", required=scenario_required, help="scenario YAML file")
        p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./out)")
        p.add_argument("--seed", type=int, help="override the scenario seed")

    p = sub.add_parser("run", help="one closed-loop run")
    common(p)
    p.add_argument("--strategy", default="saa-rti", choices=STRATEGIES)
    p.add_argument("--plot", action="store_true", help="write trajectory and force SVGs")
    p.add_argument("--dump-candidates", action="store_true", help="write every sampled candidate to CSV")
    p.add_argument("--dump-qp", action="store_true", help="write every assembled QP as text")
    p.add_argument("--timing", action="store_true", help="record per-cycle wall time")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="paired-seed Monte Carlo batch")
    common(p)
    p.add_argument("--strategy", action="append", choices=STRATEGIES,
                   help="repeatable; default: saa-rti and saa-rti-nonadaptive")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("compare", help="cost delta between two traces")
    p.add_argument("trace_a")
    p.add_argument("trace_b")
    common(p, scenario_required=False)
    p.add_argument("--plot", action="store_true", help="overlay SVG (needs --scenario)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="load and check a scenario file")
    common(p)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
