from pathlib import Path

import numpy as np
import pytest

from saa_rti.simulation import (
    SAA_RTI, SAA_RTI_STATIC, SSS_MPC, Controller, aggregate, draw_scenario, load_scenario, run_closed_loop,
    run_monte_carlo, scenario_from_dict,
)
from saa_rti.simulation.montecarlo import RunSummary
from saa_rti.simulation.runner import COLLIDED, PASSED

SCN_DIR = Path(__file__).parents[1] / "scenarios"
CRASH = {"road": {"kind": "straight"}, "initial": {"vx": 20.0}, "obstacles": [{"s_ahead": 4.0}], "duration": 1.0}


@pytest.fixture(scope="module")
def free_run():
    return run_closed_loop(load_scenario(SCN_DIR / "no_obstacle.yaml"), SAA_RTI)


def test_free_road_holds_speed_and_lane(free_run):
    assert free_run.outcome == PASSED
    assert len(free_run.cycles) == 60
    np.testing.assert_allclose(free_run.column("vx"), 15.0, atol=1e-6)
    np.testing.assert_allclose(free_run.column("d"), 0.0, atol=1e-6)
    assert free_run.J_cl < 1e-6


def test_cycle_guarantees_hold(free_run):
    for c in free_run.cycles:
        assert c.warm_violation == 0.0
        assert c.opt_cost <= c.warm_cost
        assert c.input_violation <= 1e-9
        assert c.n_qp_solves == 1


def test_crash_is_reported():
    res = run_closed_loop(scenario_from_dict(CRASH), SAA_RTI)
    assert res.outcome == COLLIDED and res.accident


def test_late_obstacle_is_ignored_until_it_appears():
    scn = scenario_from_dict({"road": {"kind": "straight"}, "obstacles": [{"s_ahead": 40.0, "appear_time": 0.5}],
                              "target": {"kind": "speed", "speed": 15.0}, "duration": 0.6})
    res = run_closed_loop(scn, SAA_RTI)
    # nothing to react to before the obstacle shows up
    np.testing.assert_allclose(res.column("vx")[:10], 15.0, atol=1e-6)
    np.testing.assert_allclose(res.column("d")[:10], 0.0, atol=1e-6)


def test_strategies_share_the_interface():
    scn = load_scenario(SCN_DIR / "dry_curve.yaml").replace(duration=0.3)
    for st in (SAA_RTI, SAA_RTI_STATIC, SSS_MPC):
        res = run_closed_loop(scn, st)
        assert len(res.trace) == 6
    with pytest.raises(ValueError):
        Controller(scn, "bogus")


def test_trace_is_written(tmp_path):
    scn = load_scenario(SCN_DIR / "no_obstacle.yaml").replace(duration=0.2)
    path = tmp_path / "trace.csv"
    run_closed_loop(scn, SAA_RTI, trace_path=path, dump_candidates_to=tmp_path / "c.csv",
                    dump_qp_to=tmp_path / "qp")
    assert path.read_text().startswith("t,s,d,")
    assert len(list((tmp_path / "qp").glob("qp_*.txt"))) == 4
    assert (tmp_path / "c.csv").stat().st_size > 0


def test_draw_depends_only_on_seed_and_index():
    base = load_scenario(SCN_DIR / "monte_carlo.yaml")
    a, b = draw_scenario(base, 4, 7, 0.55), draw_scenario(base, 4, 7, 0.95)
    assert a.obstacles == b.obstacles and a.road == b.road
    assert draw_scenario(base, 5, 7).obstacles != a.obstacles
    assert draw_scenario(base, 4, 8).obstacles != a.obstacles
    lo, hi = base.monte_carlo.obstacle_s_range
    assert lo <= a.obstacles[0].s_ahead <= hi
    assert [draw_scenario(base, i, 7).road.kind for i in range(3)] == ["straight", "curve", "curve"]


def test_aggregate_arithmetic():
    runs = [RunSummary("a", "dry", i, J, o, o == "collided") for i, (J, o) in
            enumerate([(1.0, "stopped-safe"), (3.0, "stopped-safe"), (50.0, "collided"), (2.0, "stopped-safe")])]
    (agg,) = aggregate(runs)
    assert agg.n == 4 and agg.P_acc == 0.25 and agg.J_mean == pytest.approx(2.0)
    assert agg.J_ci == pytest.approx(1.96 * 1.0 / np.sqrt(3))


@pytest.mark.slow
def test_batch_does_not_depend_on_worker_count():
    base = load_scenario(SCN_DIR / "monte_carlo.yaml").replace(duration=0.5)
    serial, _ = run_monte_carlo(base, 2, 3, [SAA_RTI], conditions=[("dry", 0.95)], jobs=1)
    pooled, _ = run_monte_carlo(base, 2, 3, [SAA_RTI], conditions=[("dry", 0.95)], jobs=2)
    assert serial == pooled
