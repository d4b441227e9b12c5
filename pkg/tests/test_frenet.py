import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from saa_rti.frenet import (
    Centerline, DegenerateVelocityError, frenet_to_cartesian, planner_to_vehicle, road_edges, vehicle_to_planner,
)
from saa_rti.vehicle_model import DPSI, PSIDOT, S, VX, VY, VehicleParams, continuous_dynamics

P = VehicleParams()
CURVES = {r: Centerline.constant_curve(r, length=300.0) for r in (35.0, 100.0, -60.0, 1e6)}


def test_constant_curve_lies_on_circle():
    R = 100.0
    cl = Centerline.constant_curve(R, length=300.0)
    for s in (0.0, 17.3, 150.0, 299.0):
        p, th = cl.point(s)
        np.testing.assert_allclose(p, [R * np.sin(s / R), R * (1 - np.cos(s / R))], atol=1e-9)
        assert th == pytest.approx(s / R)


def test_straight_line_point_and_offset():
    cl = Centerline.straight(100.0, heading0=0.3, x0=1.0, y0=-2.0)
    p, th = cl.point(10.0)
    np.testing.assert_allclose(p, [1.0 + 10 * np.cos(0.3), -2.0 + 10 * np.sin(0.3)])
    pose = frenet_to_cartesian(np.array([10.0, 2.0, 0.1, 0, 10, 0]), cl)
    assert pose.x == pytest.approx(p[0] - 2.0 * np.sin(0.3))
    assert pose.y == pytest.approx(p[1] + 2.0 * np.cos(0.3))
    assert pose.heading == pytest.approx(0.4)


def test_clothoid_heading_is_integral_of_curvature():
    cl = Centerline.from_breakpoints([(0.0, 0.0, 3.5), (50.0, 0.02, 3.5)])
    s = np.linspace(0, 50, 11)
    np.testing.assert_allclose(cl.heading(s), 0.5 * 0.02 / 50.0 * s**2, atol=1e-12)
    np.testing.assert_allclose(cl.curvature_slope(np.array([10.0, 60.0])), [0.02 / 50.0, 0.0])


def test_road_edges_are_offset_by_half_width():
    cl = Centerline.constant_curve(50.0, length=100.0, half_width=3.0)
    mid, left, right = road_edges(cl, n=50)
    np.testing.assert_allclose(np.linalg.norm(left - mid, axis=1), 3.0)
    np.testing.assert_allclose(np.linalg.norm(right - mid, axis=1), 3.0)


@pytest.mark.parametrize("kwargs", [
    dict(s=[0.0], kappa=0.0, half_width=3.0),
    dict(s=[0.0, 0.0, 1.0], kappa=0.0, half_width=3.0),
    dict(s=[0.0, 1.0], kappa=0.0, half_width=0.0),
])
def test_centerline_validation(kwargs):
    with pytest.raises(ValueError):
        Centerline(np.asarray(kwargs.pop("s")), **kwargs)


def test_point_outside_domain():
    with pytest.raises(ValueError):
        Centerline.straight(10.0).point(11.0)


def test_degenerate_velocity():
    with pytest.raises(DegenerateVelocityError):
        planner_to_vehicle([0, 0, 0.0, 0.0, 0, 0], Centerline.straight())


def test_straight_lane_change_state():
    gamma = np.array([5.0, 1.0, 10.0, 1.0, 0.0, 0.0])
    x = planner_to_vehicle(gamma, Centerline.straight())
    assert x[DPSI] == pytest.approx(np.arctan2(1.0, 10.0))
    assert x[VX] == pytest.approx(np.hypot(10.0, 1.0))
    assert x[VY] == 0.0 and x[PSIDOT] == pytest.approx(0.0)


@settings(max_examples=300, deadline=None)
@given(s=st.floats(0, 200), d=st.floats(-3, 3), sdot=st.floats(1, 30), ddot=st.floats(-3, 3),
       sddot=st.floats(-8, 3), dddot=st.floats(-3, 3), radius=st.sampled_from(sorted(CURVES)))
def test_planner_round_trip(s, d, sdot, ddot, sddot, dddot, radius):
    cl = CURVES[radius]
    x = planner_to_vehicle([s, d, sdot, ddot, sddot, dddot], cl)
    back = vehicle_to_planner(x, np.zeros(2), cl, P)
    np.testing.assert_allclose(back[:4], [s, d, sdot, ddot], rtol=1e-9, atol=1e-9)


def test_vehicle_to_planner_accelerations_follow_dynamics():
    cl = Centerline.constant_curve(100.0)
    x = np.array([10.0, 0.5, 0.05, 0.12, 14.0, 0.2])
    u = np.array([2000.0, -3000.0])
    g = vehicle_to_planner(x, u, cl, P)
    # differentiate the velocity rows numerically along the continuous dynamics
    h = 1e-6
    f = continuous_dynamics(x, u, cl.curvature(x[S]), P)
    g2 = vehicle_to_planner(x + h * f, u, cl, P)
    g0 = vehicle_to_planner(x - h * f, u, cl, P)
    assert g.sddot == pytest.approx((g2.sdot - g0.sdot) / (2 * h), rel=1e-6)
    assert g.dddot == pytest.approx((g2.ddot - g0.ddot) / (2 * h), rel=1e-6)
