import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from shapely.geometry import Point, Polygon, box

from saa_rti.constraints import (
    ActuatorLimits, FrictionEstimate, build_input_constraints, ellipse_vertices,
    inscribe_ellipse_polytope,
)
from saa_rti.vehicle_model import VehicleParams

P = VehicleParams()
LIM = ActuatorLimits.default(P)


def shapely_set(mu, n_edges=16):
    ell = Polygon(ellipse_vertices(mu, P.Fzf, P.Fz, n_edges))
    return ell.intersection(box(-LIM.Fyf_max, LIM.Fx_min, LIM.Fyf_max, LIM.Fx_max))


def boundary_points(poly, n, rng):
    """Uniform points on the polygon boundary."""
    v = poly.vertices
    w = np.roll(v, -1, axis=0)
    seg = rng.integers(0, len(v), n)
    t = rng.uniform(0, 1, n)[:, None]
    return v[seg] + t * (w[seg] - v[seg])


def test_halfspaces_normalised_and_vertices_tight():
    poly = build_input_constraints(0.8, P, LIM)
    np.testing.assert_array_equal(poly.h, 1.0)
    assert np.all(poly.contains(poly.vertices))
    assert poly.max_violation(poly.vertices) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("mu", [0.3, 0.55, 0.8, 0.95, 1.2])
def test_matches_shapely_membership(mu):
    poly = build_input_constraints(mu, P, LIM)
    ref = shapely_set(mu)
    rng = np.random.default_rng(int(mu * 100))
    pts = rng.uniform([-14e3, -20e3], [14e3, 20e3], size=(3000, 2))
    mine = poly.contains(pts)
    oracle = np.array([ref.contains(Point(p)) for p in pts])
    # points within rounding distance of the boundary may go either way
    near = np.array([ref.exterior.distance(Point(p)) < 1e-6 for p in pts])
    assert np.all((mine == oracle) | near)
    assert Polygon(poly.vertices).symmetric_difference(ref).area < 1e-6 * ref.area


@pytest.mark.parametrize("mu", [0.2, 0.55, 0.95, 1.5])
def test_boundary_inside_friction_ellipse(mu):
    poly = build_input_constraints(mu, P, LIM)
    pts = boundary_points(poly, 10_000, np.random.default_rng(3))
    r = (pts[:, 0] / (mu * P.Fzf)) ** 2 + (pts[:, 1] / (mu * P.Fz)) ** 2
    assert np.all(r <= 1.0 + 1e-12)


def test_monotone_in_friction():
    rng = np.random.default_rng(5)
    for _ in range(100):
        mu1, mu2 = np.sort(rng.uniform(0.1, 1.5, 2))
        small = build_input_constraints(mu1, P, LIM)
        big = build_input_constraints(mu2, P, LIM)
        assert np.all(big.contains(small.vertices, tol=1e-9))


def test_box_binds_at_high_friction():
    poly = build_input_constraints(1.5, P, LIM)
    assert np.max(poly.vertices[:, 0]) == pytest.approx(LIM.Fyf_max)
    assert np.max(poly.vertices[:, 1]) == pytest.approx(LIM.Fx_max)
    assert poly.max_braking()[1] == pytest.approx(LIM.Fx_min)


def test_max_braking_low_friction_is_ellipse_limited():
    poly = build_input_constraints(0.3, P, LIM)
    u = poly.max_braking()
    assert u[0] == 0.0
    assert u[1] == pytest.approx(-0.3 * P.Fz)
    assert poly.contains(u)


def test_inscribed_polygon_vertices_on_ellipse():
    poly = inscribe_ellipse_polytope(0.7, P.Fzf, P.Fz, 16)
    r = (poly.vertices[:, 0] / (0.7 * P.Fzf)) ** 2 + (poly.vertices[:, 1] / (0.7 * P.Fz)) ** 2
    np.testing.assert_allclose(r, 1.0)
    assert len(poly.h) == 16


@settings(max_examples=200, deadline=None)
@given(fy=st.floats(-3e4, 3e4), fx=st.floats(-3e4, 3e4), mu=st.floats(0.1, 1.5))
def test_scale_inside_lands_in_polytope(fy, fx, mu):
    poly = build_input_constraints(mu, P, LIM)
    u = np.array([fy, fx])
    v = poly.scale_inside(u)
    assert poly.contains(v, tol=1e-9)
    if poly.contains(u):
        np.testing.assert_array_equal(u, v)
    else:
        # radial: same direction, on the boundary
        assert u[0] * v[1] - u[1] * v[0] == pytest.approx(0.0, abs=1e-6 * np.dot(u, u))
        assert poly.max_violation(v) == pytest.approx(0.0, abs=1e-9)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        FrictionEstimate(0.0)
    with pytest.raises(ValueError):
        FrictionEstimate(1.6)
    with pytest.raises(ValueError):
        ActuatorLimits(1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        inscribe_ellipse_polytope(0.5, P.Fzf, P.Fz, 3)


def test_tiny_box_still_gives_a_polygon():
    # both sets contain the origin in their interior, so the intersection is never empty
    lim = ActuatorLimits(1.0, -1.0, 1.0)
    poly = build_input_constraints(0.5, P, lim)
    assert len(poly.vertices) == 4
    assert poly.contains(np.zeros(2))
