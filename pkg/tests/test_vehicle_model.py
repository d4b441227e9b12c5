import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from saa_rti.vehicle_model import (
    D, DPSI, PSIDOT, S, VX, VY, SingularFrameError, VehicleParams, continuous_dynamics, discrete_step,
    linearize, rear_lateral_force, rollout, steady_cornering_vy, yaw_balance_input,
)

P = VehicleParams()
TS = 0.05


def euler_map(x, u, kappa0, dkappa):
    return x + TS * continuous_dynamics(x, u, kappa0 + dkappa * (x[S] - X_S0), P)


X_S0 = 10.0


def central_jacobian(f, z, h):
    cols = []
    for i in range(len(z)):
        e = np.zeros(len(z))
        e[i] = h[i]
        cols.append((f(z + e) - f(z - e)) / (2.0 * h[i]))
    return np.column_stack(cols)


def random_point(rng):
    x = np.array([X_S0, rng.uniform(-3, 3), rng.uniform(-0.4, 0.4), rng.uniform(-0.6, 0.6),
                  rng.uniform(0.5, 30.0), rng.uniform(-2, 2)])
    u = np.array([rng.uniform(-9e3, 9e3), rng.uniform(-15e3, 4e3)])
    kappa = rng.uniform(-0.03, 0.03)
    dk = rng.uniform(-1e-3, 1e-3)
    return x, u, kappa, dk


def test_fixed_params():
    assert P.Fzf == pytest.approx(1500 * 9.81 * 1.42 / 2.46)
    assert P.Fz == pytest.approx(1500 * 9.81)


def test_params_reject_nonpositive():
    with pytest.raises(ValueError):
        VehicleParams(m=0.0)


def test_jacobian_matches_central_differences():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(200):
        x, u, kappa, dk = random_point(rng)
        if abs(x[VX] - P.v_guard) < 0.05:
            continue  # kink of the slip-angle floor
        jac = linearize(x, u, TS, kappa, P, dk)
        hx = 1e-6 * np.maximum(1.0, np.abs(x))
        A_fd = central_jacobian(lambda z: euler_map(z, u, kappa, dk), x, hx)
        B_fd = central_jacobian(lambda w: euler_map(x, w, kappa, dk), u, 1e-3 * np.maximum(1.0, np.abs(u)))
        for an, fd in ((jac.A, A_fd), (jac.B, B_fd)):
            err = np.abs(an - fd) / np.maximum(1.0, np.abs(fd))
            worst = max(worst, err.max())
        np.testing.assert_allclose(jac.c, euler_map(x, u, kappa, dk))
    assert worst <= 1e-5


def test_linearize_broadcasts_over_batches():
    rng = np.random.default_rng(1)
    pts = [random_point(rng) for _ in range(5)]
    X = np.array([p[0] for p in pts])
    U = np.array([p[1] for p in pts])
    K = np.array([p[2] for p in pts])
    batch = linearize(X, U, TS, K, P)
    for i, (x, u, k, _) in enumerate(pts):
        single = linearize(x, u, TS, k, P)
        np.testing.assert_allclose(batch.A[i], single.A)
        np.testing.assert_allclose(batch.c[i], single.c)


def test_linearize_rejects_reverse_speed():
    x = np.array([0, 0, 0, 0, -1.0, 0])
    with pytest.raises(ValueError):
        linearize(x, np.zeros(2), TS, 0.0, P)


def test_singular_frame_raises():
    x = np.array([0.0, 10.0, 0, 0, 10.0, 0])
    with pytest.raises(SingularFrameError):
        continuous_dynamics(x, np.zeros(2), 0.1, P)


def test_straight_coasting_is_uniform_motion():
    x0 = np.array([0.0, 0.5, 0.0, 0.0, 12.0, 0.0])
    xs = rollout(x0, np.zeros((20, 2)), TS, lambda s: 0.0 * s, P)
    np.testing.assert_allclose(xs[:, S], 12.0 * TS * np.arange(21))
    np.testing.assert_allclose(xs[:, [D, DPSI, PSIDOT, VY]], np.tile([0.5, 0, 0, 0], (21, 1)), atol=1e-12)


def test_longitudinal_force_gives_constant_acceleration():
    x0 = np.array([0.0, 0.0, 0.0, 0.0, 10.0, 0.0])
    x1 = discrete_step(x0, np.array([0.0, -3000.0]), TS, lambda s: 0.0, P)
    assert x1[VX] == pytest.approx(10.0 - TS * 3000.0 / P.m)


@pytest.mark.parametrize("vx,radius", [(15.0, 100.0), (10.0, 35.0), (20.0, 400.0), (5.0, 50.0)])
def test_steady_cornering_is_an_equilibrium(vx, radius):
    kappa = 1.0 / radius
    r = kappa * vx
    vy = steady_cornering_vy(vx, r, P)
    x = np.array([0.0, 0.0, -np.arctan2(vy, vx), r, vx, vy])
    u = yaw_balance_input(x, P)
    f = continuous_dynamics(x, u, kappa, P)
    np.testing.assert_allclose(f[[D, PSIDOT, VX, VY]], 0.0, atol=1e-9)
    # yaw rate follows kappa * vx while the lane turns at kappa * speed
    assert f[DPSI] == pytest.approx(kappa * (vx - np.hypot(vx, vy)), abs=1e-12)
    assert f[S] > 0


def test_rear_force_guard_floors_the_speed():
    x = np.array([0, 0, 0, 0.2, 2.0, 0.1])
    slow = rear_lateral_force(x, P)
    at_guard = rear_lateral_force(np.array([0, 0, 0, 0.2, P.v_guard, 0.1]), P)
    assert slow == pytest.approx(at_guard)


@settings(max_examples=200, deadline=None)
@given(vx=st.floats(0.0, 40.0), vy=st.floats(-3, 3), r=st.floats(-1, 1))
def test_rear_force_opposes_rear_slip(vx, vy, r):
    x = np.array([0, 0, 0, r, vx, vy])
    z = vy - P.lr * r
    F = rear_lateral_force(x, P)
    assert F * z <= 0
    assert abs(F) <= P.Car * np.pi / 2
