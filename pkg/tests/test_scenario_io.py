from pathlib import Path

import numpy as np
import pytest

from saa_rti.simulation.io import TRACE_COLUMNS, SchemaError, fmt, read_trace, write_trace
from saa_rti.simulation.scenario import (
    ScenarioError, dump_scenario, load_scenario, scenario_from_dict,
)
from saa_rti.vehicle_model import continuous_dynamics, yaw_balance_input

SCENARIOS = sorted((Path(__file__).parents[1] / "scenarios").glob("*.yaml"))


@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_shipped_scenarios_round_trip(path, tmp_path):
    scn = load_scenario(path)
    out = tmp_path / "again.yaml"
    dump_scenario(scn, out)
    assert load_scenario(out) == scn


def test_defaults_and_derived_objects():
    scn = scenario_from_dict({"road": {"kind": "curve", "radius": 100.0}})
    x = scn.initial_state()
    assert x[3] == pytest.approx(0.15)
    # steady cornering: lateral dynamics at rest under the yaw-balance input
    f = continuous_dynamics(x, yaw_balance_input(x, scn.vehicle), 0.01, scn.vehicle)
    assert abs(f[1]) < 1e-9 and abs(f[5]) < 1e-9
    ob, t_appear = scn.obstacle_list()[0]
    assert (ob.s, ob.d, t_appear) == (15.0, 0.0, 0.0)
    assert scn.reference_state()[4] == 0.0
    assert scenario_from_dict({"target": {"kind": "speed", "speed": 12.0}}).reference_state()[4] == 12.0
    raw = scenario_from_dict({"target": {"kind": "speed", "speed": 12.0, "raw_state": True}})
    np.testing.assert_array_equal(raw.reference_state(), np.zeros(6))


@pytest.mark.parametrize("data", [
    {"bogus": 1},
    {"road": {"kind": "spiral"}},
    {"road": {"kind": "straight", "wobble": 2}},
    {"initial": {"vx": -1.0}},
    {"initial": {"d": 3.5}},
    {"obstacles": [{"s_ahead": 1000.0}]},
    {"obstacles": [{"d": 9.0}]},
    {"friction": "icy"},
    {"friction": 3.0},
    {"target": {"kind": "drift"}},
    {"estimator": {"mode": "psychic"}},
    {"duration": 0.0},
    {"controller": {"beta": 1.0}},
    {"vehicle": {"m": -5}},
    "not a mapping",
])
def test_invalid_scenarios(data):
    with pytest.raises(ScenarioError):
        scenario_from_dict(data)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "nope.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("road: [unclosed\n")
    with pytest.raises(ScenarioError):
        load_scenario(bad)


def test_friction_forms():
    a = scenario_from_dict({"friction": 0.55})
    b = scenario_from_dict({"friction": {"mu_act": 0.55}})
    c = scenario_from_dict({"friction": {"segments": [[0.0, 0.95], [30.0, 0.55]]}})
    assert a.friction == b.friction
    assert c.friction.at(10.0) == 0.95 and c.friction.at(40.0) == 0.55


def test_trace_round_trip(tmp_path):
    rows = [tuple(float(i + j) for j in range(len(TRACE_COLUMNS))) for i in range(3)]
    rows[1] = rows[1][:18] + (np.nan,) + rows[1][19:]
    path = tmp_path / "t.csv"
    write_trace(path, rows)
    tr = read_trace(path)
    assert tuple(tr) == TRACE_COLUMNS
    np.testing.assert_array_equal(tr["t"], [0.0, 1.0, 2.0])
    assert np.isnan(tr["cycle_time_ms"][1])
    assert path.read_text().splitlines()[2].split(",")[18] == ""


def test_trace_schema_error(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        read_trace(path)


def test_fmt():
    assert fmt(np.nan) == "" and fmt(3) == "3" and fmt(0.1) == "0.1" and fmt("x") == "x"
    assert float(fmt(1 / 3)) == pytest.approx(1 / 3, rel=1e-12)
