import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import enumerate_active_sets, random_feasible_qp
from saa_rti.qp import (
    INFEASIBLE, SOLVED, HorizonStructure, QpProblem, QpSettings, dump_problem, kkt_residuals, load_problem,
    shift_blocks, solve, warm_start_shift,
)

INF = np.inf

# (P, q, A, l, u, z*, y*) derived by hand from the KKT conditions P z + q + A'y = 0
HAND = {
    "upper-active": ([[1, 0], [0, 1]], [-1, -1], [[1, 1]], [-INF], [1.0], [0.5, 0.5], [0.5]),
    "lower-active": ([[1]], [0], [[1]], [1.0], [INF], [1.0], [-1.0]),
    "equality": ([[1, 0], [0, 1]], [0, 0], [[1, 1]], [2.0], [2.0], [1.0, 1.0], [-1.0]),
    "inactive-box": ([[1]], [-1], [[1]], [-5.0], [5.0], [1.0], [0.0]),
    "linear-on-box": ([[0, 0], [0, 0]], [1, 1], np.eye(2), [0, 0], [1, 1], [0.0, 0.0], [-1.0, -1.0]),
    "weighted-corner": ([[2, 0], [0, 4]], [-8, -8], np.eye(2), [-INF, -INF], [1, 1], [1.0, 1.0], [6.0, 4.0]),
}


@pytest.mark.parametrize("name", sorted(HAND))
def test_hand_derived_kkt(name):
    P, q, A, l, u, z_star, y_star = HAND[name]
    sol = solve(QpProblem(P, q, A, l, u))
    assert sol.status == SOLVED
    np.testing.assert_allclose(sol.z, z_star, atol=1e-7)
    np.testing.assert_allclose(sol.y, y_star, atol=1e-6)


def test_matches_active_set_enumeration():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(200):
        n, m = int(rng.integers(1, 9)), int(rng.integers(1, 13))
        P, q, A, l, u = random_feasible_qp(rng, n, m)
        z_ref, f_ref = enumerate_active_sets(P, q, A, l, u)
        sol = solve(QpProblem(P, q, A, l, u))
        assert sol.status == SOLVED
        worst = max(worst, abs(sol.objective - f_ref) / max(1.0, abs(f_ref)))
        np.testing.assert_allclose(sol.z, z_ref, atol=1e-4 * (1 + np.abs(z_ref).max()))
    assert worst <= 1e-6


def test_oracle_on_hand_examples():
    for P, q, A, l, u, z_star, _ in HAND.values():
        if np.linalg.eigvalsh(np.asarray(P, float)).min() > 0:
            z, _ = enumerate_active_sets(P, q, A, l, u)
            np.testing.assert_allclose(z, z_star, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6), m=st.integers(1, 8))
def test_kkt_residuals_small_at_solution(seed, n, m):
    P, q, A, l, u = random_feasible_qp(np.random.default_rng(seed), n, m)
    prob = QpProblem(P, q, A, l, u)
    sol = solve(prob)
    rp, rd = kkt_residuals(prob, sol.z, sol.y)
    assert sol.solved
    assert rp <= 1e-6 * (1 + np.abs(prob.l[np.isfinite(prob.l)]).max(initial=0) + np.abs(prob.u[np.isfinite(prob.u)]).max(initial=0))
    assert rd <= 1e-5 * (1 + np.abs(q).max())
    # complementarity: duals vanish on inactive rows and carry the right sign on active ones
    Az = A @ sol.z
    assert np.all(sol.y[Az < u - 1e-4] <= 1e-5)
    assert np.all(sol.y[Az > l + 1e-4] >= -1e-5)


def test_warm_start_gives_same_answer():
    rng = np.random.default_rng(7)
    P, q, A, l, u = random_feasible_qp(rng, 6, 9)
    prob = QpProblem(P, q, A, l, u)
    cold = solve(prob)
    warm = solve(prob, warm=(cold.z + 0.01, None))
    assert warm.objective == pytest.approx(cold.objective, rel=1e-7, abs=1e-9)


def test_detects_infeasibility():
    prob = QpProblem(np.eye(1), [0.0], [[1.0], [1.0]], [1.0, -INF], [INF, 0.0])
    assert solve(prob, settings=QpSettings(max_iter=200)).status == INFEASIBLE


@pytest.mark.parametrize("bad", [
    dict(P=[[1, 2], [0, 1]]),
    dict(P=[[-1, 0], [0, 1]]),
    dict(l=[2.0], u=[1.0]),
    dict(A=[[1, 0], [0, 1]]),
])
def test_problem_validation(bad):
    args = dict(P=np.eye(2), q=[0, 0], A=[[1, 1]], l=[0.0], u=[1.0])
    args.update(bad)
    with pytest.raises(ValueError):
        QpProblem(**args)


def test_dump_load_round_trip(tmp_path):
    P, q, A, l, u = random_feasible_qp(np.random.default_rng(3), 4, 5)
    prob = QpProblem(P, q, A, l, u)
    path = tmp_path / "qp.txt"
    dump_problem(prob, path)
    back = load_problem(path)
    for name in ("P", "q", "A", "l", "u"):
        np.testing.assert_array_equal(getattr(back, name), getattr(prob, name))


def test_shift_blocks():
    s = HorizonStructure(3, 2, tail=1)
    v = np.array([1, 2, 3, 4, 5, 6, 9.0])
    np.testing.assert_array_equal(shift_blocks(v, s), [3, 4, 5, 6, 5, 6, 9])
    with pytest.raises(ValueError):
        shift_blocks(v[:-1], s)
    sol = solve(QpProblem(np.eye(7), -v, np.eye(7), -INF * np.ones(7), INF * np.ones(7)))
    z, y = warm_start_shift(sol, s)
    np.testing.assert_allclose(z, [3, 4, 5, 6, 5, 6, 9], atol=1e-9)
    assert y.shape == (7,)
