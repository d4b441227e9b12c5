"""State-space sampling planner.

Terminal states are sampled on a grid of lateral offsets and terminal
speeds.  Each candidate joins the current planner state to its terminal
state with a quintic in ``d(t)`` and a piecewise-affine ``s(t)``, and is
then executed on the forward-Euler vehicle model by an inverse-dynamics
tracking law.  The resulting state sequence satisfies the prediction
model exactly and the tracking inputs are the equivalent tire forces that
get checked against the adaptive polytope.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .constraints import InputPolytope
from .frenet import Centerline, vehicle_to_planner
from .vehicle_model import (
    D, DPSI, EPS_FRAME, NU, NX, PSIDOT, S, VX, VY, VehicleParams, continuous_dynamics,
    rear_lateral_force,
)


class NoFeasibleTrajectoryError(RuntimeError):
    """No candidate passed the constraint and collision checks."""


class QuinticCoeffs(NamedTuple):
    a0: float
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float

    def __call__(self, t, derivative: int = 0):
        return quintic_eval(np.asarray(self), t, derivative)


def quintic_matrix(T) -> np.ndarray:
    """Boundary-condition matrix; ``T`` of shape (K,) gives a stack of shape (K, 6, 6)."""
    T = np.asarray(T, dtype=float)
    o, z = np.ones_like(T), np.zeros_like(T)
    rows = [
        [o, z, z, z, z, z],
        [z, o, z, z, z, z],
        [z, z, 2 * o, z, z, z],
        [o, T, T**2, T**3, T**4, T**5],
        [z, o, 2 * T, 3 * T**2, 4 * T**3, 5 * T**4],
        [z, z, 2 * o, 6 * T, 12 * T**2, 20 * T**3],
    ]
    return np.moveaxis(np.array(rows, dtype=float), (0, 1), (-2, -1))


def solve_quintic(boundary: Sequence[float], T: float) -> QuinticCoeffs:
    """Coefficients matching ``d, d', d''`` at ``t = 0`` and ``t = T``."""
    if not T > 0:
        raise ValueError("horizon duration must be positive")
    return QuinticCoeffs(*np.linalg.solve(quintic_matrix(T), np.asarray(boundary, dtype=float)))


def solve_quintic_batch(boundaries: np.ndarray, T) -> np.ndarray:
    """Vectorised :func:`solve_quintic` for boundary rows of shape (K, 6); ``T`` is shared or per row."""
    b = np.asarray(boundaries, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise ValueError("horizon duration must be positive")
    if T.ndim == 0:
        return np.linalg.solve(quintic_matrix(T), b.T).T
    return np.linalg.solve(quintic_matrix(T), b[..., None])[..., 0]


def quintic_eval(coeffs, t, derivative: int = 0):
    """Evaluate a quintic (or batch of them, coeffs shape (..., 6)) at times ``t``."""
    c = np.asarray(coeffs, dtype=float)
    t = np.asarray(t, dtype=float)
    powers = np.arange(6)
    factor = np.ones(6)
    for j in range(derivative):
        factor = factor * np.clip(powers - j, 0, None)
    exps = np.clip(powers - derivative, 0, None)
    basis = factor * t[..., None] ** exps
    if c.ndim == 1:
        return basis @ c
    return np.einsum("...j,kj->k...", basis, c)


@dataclass(frozen=True)
class LongitudinalProfile:
    """Continuous, piecewise-affine ``s(t)``; speed is constant per segment."""

    t_breaks: np.ndarray
    s_breaks: np.ndarray
    speeds: np.ndarray
    terminal_speed: float

    def __call__(self, t):
        return np.interp(t, self.t_breaks, self.s_breaks)

    def speed(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.t_breaks, t, side="right") - 1
        v = self.speeds[np.clip(idx, 0, len(self.speeds) - 1)]
        return np.where(t >= self.t_breaks[-1] - 1e-12, self.terminal_speed, v)


def longitudinal_profile(s0: float, sdot0: float, sdotN: float, T: float, n_segments: int) -> LongitudinalProfile:
    """Segment ``j`` of ``n`` runs at ``sdot0 + (sdotN - sdot0) * j / n``."""
    if sdot0 < 0 or sdotN < 0:
        raise ValueError("longitudinal speeds must be non-negative")
    if n_segments < 1:
        raise ValueError("need at least one segment")
    j = np.arange(n_segments)
    speeds = sdot0 + (sdotN - sdot0) * j / n_segments
    dt = T / n_segments
    t_breaks = np.linspace(0.0, T, n_segments + 1)
    s_breaks = s0 + np.concatenate([[0.0], np.cumsum(speeds * dt)])
    return LongitudinalProfile(t_breaks, s_breaks, speeds, float(sdotN))


@dataclass(frozen=True)
class Obstacle:
    s: float
    d: float
    r: float = 0.5


@dataclass(frozen=True)
class TerminalStateGrid:
    offsets: tuple[float, ...]
    speeds: tuple[float, ...]

    def __post_init__(self):
        if not self.offsets or not self.speeds:
            raise ValueError("terminal grid must be nonempty")
        if min(self.speeds) < 0:
            raise ValueError("terminal speeds must be non-negative")

    def __len__(self):
        return len(self.offsets) * len(self.speeds)

    def pairs(self):
        """``(d_N, sdot_N)`` in lateral-offset-major order."""
        return [(d, v) for d in self.offsets for v in self.speeds]


@dataclass(frozen=True)
class SamplerConfig:
    n_offsets: int = 9
    speed_fractions: tuple[float, ...] = (0.0, 0.5, 1.0)
    lane_margin: float = 0.25
    n_segments: int | None = None  # None: one segment per control step
    kp: float = 1.5     # lateral error -> lateral velocity, 1/s
    kv: float = 3.0     # heading error -> yaw rate, 1/s
    kr: float = 8.0     # yaw-rate error -> yaw acceleration, 1/s
    saturate: bool = True  # keep the follower's commands inside the input polytope


def default_grid(sdot0: float, half_width: float, r_veh: float, cfg: SamplerConfig = SamplerConfig()) -> TerminalStateGrid:
    reach = max(half_width - r_veh - cfg.lane_margin, 0.0)
    offsets = np.linspace(-reach, reach, cfg.n_offsets) if cfg.n_offsets > 1 else np.zeros(1)
    speeds = sorted({round(f * max(sdot0, 0.0), 12) for f in cfg.speed_fractions})
    return TerminalStateGrid(tuple(float(o) for o in offsets), tuple(float(v) for v in speeds))


@dataclass
class Trajectory:
    states: np.ndarray
    inputs: np.ndarray
    cost: float = np.inf
    feasible: bool = False
    collision_free: bool = False
    source: str = "sampled"
    index: int = -1
    terminal: tuple[float, float] | None = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.states.shape[0] != self.inputs.shape[0] + 1:
            raise ValueError("need len(states) == len(inputs) + 1")

    @property
    def horizon(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class CostWeights:
    """Quadratic weights on state deviation (stage, terminal) and input."""

    Q: np.ndarray = field(default_factory=lambda: np.diag([0.0, 0.02, 0.05, 0.02, 0.003, 0.02]))
    Qf: np.ndarray = field(default_factory=lambda: np.diag([0.0, 0.1, 0.25, 0.1, 0.015, 0.1]))
    R: np.ndarray = field(default_factory=lambda: np.diag([1e-9, 1e-10]))

    def __post_init__(self):
        for name in ("Q", "Qf", "R"):
            M = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if M.shape[0] != M.shape[1] or np.any(np.linalg.eigvalsh(0.5 * (M + M.T)) < -1e-12):
                raise ValueError(f"{name} must be square positive semidefinite")
            object.__setattr__(self, name, M)

    @classmethod
    def from_diagonals(cls, Q, Qf, R) -> "CostWeights":
        return cls(np.diag(Q), np.diag(Qf), np.diag(R))


def sample_trajectories(x0, u_prev, grid: TerminalStateGrid, centerline: Centerline, N: int, Ts: float,
                        params: VehicleParams, cfg: SamplerConfig = SamplerConfig(),
                        poly: InputPolytope | None = None) -> list[Trajectory]:
    """Generate one dynamically consistent candidate per terminal grid point.

    With ``poly`` the follower's commands are pulled into the polytope
    (steering keeps priority over braking), so candidates trade terminal
    accuracy for admissible forces.
    Candidates that cross the Frenet singularity are dropped.
    """
    x0 = np.asarray(x0, dtype=float)
    gamma0 = vehicle_to_planner(x0, u_prev, centerline, params)
    T = N * Ts
    pairs = grid.pairs()
    C = len(pairs)
    dN = np.array([p[0] for p in pairs])
    vN = np.array([p[1] for p in pairs])
    t = np.arange(N + 1) * Ts

    bnd = np.zeros((C, 6))
    bnd[:, 0], bnd[:, 1], bnd[:, 2], bnd[:, 3] = gamma0.d, gamma0.ddot, gamma0.dddot, dN
    coeffs = solve_quintic_batch(bnd, T)
    d_p = quintic_eval(coeffs, t, 0)
    dd_p = quintic_eval(coeffs, t, 1)

    n_seg = N if cfg.n_segments is None else cfg.n_segments
    sdot0 = max(gamma0.sdot, 0.0)
    sd_p = np.empty((C, N + 1))
    s_p = np.empty((C, N + 1))
    for speed in np.unique(vN):
        prof = longitudinal_profile(gamma0.s, sdot0, float(speed), T, n_seg)
        rows = vN == speed
        sd_p[rows] = prof.speed(t)
        s_p[rows] = prof(t)
    kap_p = centerline.curvature(s_p)
    a_p = sd_p * (1.0 - d_p * kap_p)
    v_p = np.hypot(a_p, dd_p)

    states = np.empty((C, N + 1, NX))
    inputs = np.empty((C, N, NU))
    states[:, 0] = x0
    valid = np.ones(C, dtype=bool)
    X = np.repeat(x0[None], C, axis=0)
    with np.errstate(all="ignore"):
        _track(X, states, inputs, valid, centerline, params, Ts, N, cfg, v_p, d_p, dd_p, a_p, poly)
    valid &= np.all(np.isfinite(states), axis=(1, 2)) & np.all(np.isfinite(inputs), axis=(1, 2))

    out = []
    for i in np.flatnonzero(valid):
        out.append(Trajectory(states[i], inputs[i], source="sampled", index=int(i), terminal=pairs[i]))
    return out


def _track(X, states, inputs, valid, centerline, params, Ts, N, cfg, v_p, d_p, dd_p, a_p, poly=None):
    """Cascaded path follower on the Euler model, in place.

    Lateral error sets a heading target, the heading error a yaw-rate
    target, and the front force tracks that yaw rate.  The longitudinal
    force hits the planned speed at the next step.
    """
    m = params.m
    heading_p = np.arctan2(dd_p, np.maximum(a_p, 1e-3))
    heading_rate_p = np.diff(heading_p, axis=1) / Ts
    yaw_acc_p = np.diff(heading_rate_p, axis=1, append=heading_rate_p[:, -1:]) / Ts
    for k in range(N):
        kap = centerline.curvature(X[:, S])
        den = 1.0 - X[:, D] * kap
        bad = np.abs(den) < EPS_FRAME * 10
        if bad.any():
            valid &= ~bad
            X[bad, D] = 0.0
            den = np.where(bad, 1.0, den)
        dpsi, r, vx, vy = X[:, DPSI], X[:, PSIDOT], X[:, VX], X[:, VY]
        sdot = (vx * np.cos(dpsi) - vy * np.sin(dpsi)) / den
        vx_target = np.sqrt(np.maximum(v_p[:, k + 1] ** 2 - vy * vy, 0.0))
        Fx = m * (vx_target - vx) / Ts

        # feedback fades out as the planned speed goes to zero
        fade = np.clip(a_p[:, k] / 3.0, 0.0, 1.0)
        ddot_cmd = dd_p[:, k] + fade * cfg.kp * (d_p[:, k] - X[:, D])
        heading_cmd = np.arctan2(ddot_cmd, np.maximum(a_p[:, k], 1e-3))
        # sideslip is part of the velocity heading; steer the body so the velocity follows the path
        beta = np.arctan2(vy, np.maximum(vx, 1.0))
        r_cmd = kap * sdot + fade * (heading_rate_p[:, k] + cfg.kv * (heading_cmd - (dpsi + beta)))
        yaw_acc = fade * yaw_acc_p[:, k] + cfg.kr * (r_cmd - r)
        Fyr = rear_lateral_force(X, params)
        Fyf = (params.Iz * yaw_acc + params.lr * Fyr) / params.lf
        u = np.column_stack([Fyf, Fx])
        if poly is not None:
            u = _steering_first(u, poly)
        inputs[:, k] = u
        X = X + Ts * continuous_dynamics(X, u, kap, params)
        states[:, k + 1] = X


def _steering_first(u, poly: InputPolytope):
    """Pull commands into the polytope by shedding longitudinal force first, then scaling what is left."""
    Fy, Fx = u[:, 0:1], u[:, 1:2]
    hy, hx = poly.H[None, :, 0], poly.H[None, :, 1]
    room = poly.h[None, :] - hy * Fy
    push = hx * Fx
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(push > 0, room / push, np.inf)
    a = np.clip(np.min(a, axis=1), 0.0, 1.0)
    u = np.column_stack([Fy[:, 0], a * Fx[:, 0]])
    r = np.max(u @ poly.H.T / poly.h, axis=1)
    return u / np.maximum(r, 1.0)[:, None]


def check_feasibility(traj: Trajectory, poly: InputPolytope) -> bool:
    return bool(np.all(poly.contains(traj.inputs)))


def admissible_speeds(traj: Trajectory, tol: float = 1e-9) -> bool:
    return bool(np.all(traj.states[:, VX] >= -tol))


def collision_free_mask(states: np.ndarray, obstacles: Sequence[Obstacle], centerline: Centerline,
                        r_veh: float, clearance: float = 0.0) -> np.ndarray:
    """Per-state test for arrays of shape (..., 6); ``clearance`` pads the obstacle discs only."""
    s, d = states[..., S], states[..., D]
    ok = np.abs(d) + r_veh <= centerline.width(s)
    for ob in obstacles:
        ok &= np.hypot(s - ob.s, d - ob.d) > r_veh + ob.r + clearance
    return ok


def check_collision(traj: Trajectory, obstacles: Sequence[Obstacle], centerline: Centerline,
                    r_veh: float = 1.0, clearance: float = 0.0) -> bool:
    """True when the trajectory stays on the road and clear of every obstacle disc."""
    return bool(np.all(collision_free_mask(traj.states, obstacles, centerline, r_veh, clearance)))


def evaluate_cost(traj: Trajectory, weights: CostWeights, x_ref, u_ref=None) -> float:
    """Quadratic stage + terminal cost on deviations from ``x_ref`` (and ``u_ref``)."""
    return float(trajectory_cost(traj.states, traj.inputs, weights, x_ref, u_ref))


def trajectory_cost(states, inputs, weights: CostWeights, x_ref, u_ref=None):
    states = np.asarray(states, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    e = states - np.asarray(x_ref, dtype=float)
    du = inputs if u_ref is None else inputs - np.asarray(u_ref, dtype=float)
    stage = np.einsum("...ki,ij,...kj->...", e[..., :-1, :], weights.Q, e[..., :-1, :])
    term = np.einsum("...i,ij,...j->...", e[..., -1, :], weights.Qf, e[..., -1, :])
    inp = np.einsum("...ki,ij,...kj->...", du, weights.R, du)
    return stage + term + inp


def stage_cost(x, u, weights: CostWeights, x_ref) -> float:
    e = np.asarray(x, dtype=float) - np.asarray(x_ref, dtype=float)
    u = np.asarray(u, dtype=float)
    return float(e @ weights.Q @ e + u @ weights.R @ u)


def shift_trajectory(traj: Trajectory) -> Trajectory:
    """Advance one step; the terminal state and the last input are duplicated."""
    states = np.vstack([traj.states[1:], traj.states[-1:]])
    inputs = np.vstack([traj.inputs[1:], traj.inputs[-1:]])
    return Trajectory(states, inputs, source="shifted-previous")


def select_trajectory(candidates: Sequence[Trajectory], previous_shifted: Trajectory | None,
                      poly: InputPolytope, obstacles: Sequence[Obstacle], weights: CostWeights, x_ref,
                      centerline: Centerline, r_veh: float = 1.0, clearance: float = 0.0) -> Trajectory:
    """Lowest-cost candidate passing the constraint and collision checks.

    The shifted previous optimum competes on equal terms; ties go to the
    lowest grid index, and the shifted trajectory ranks after all samples.
    With ``clearance > 0`` candidates that keep that extra distance from
    every obstacle are preferred; the others are used only if none does.
    """
    pool = list(candidates)
    if previous_shifted is not None:
        pool.append(previous_shifted)
    if not pool:
        raise NoFeasibleTrajectoryError("no candidate trajectories")
    best, best_clear = None, None
    for traj in pool:
        traj.feasible = check_feasibility(traj, poly)
        traj.collision_free = check_collision(traj, obstacles, centerline, r_veh) and admissible_speeds(traj)
        ok = traj.feasible and traj.collision_free
        traj.cost = evaluate_cost(traj, weights, x_ref) if ok else np.inf
        if not ok:
            continue
        if best is None or traj.cost < best.cost:
            best = traj
        if clearance > 0 and check_collision(traj, obstacles, centerline, r_veh, clearance) \
                and (best_clear is None or traj.cost < best_clear.cost):
            best_clear = traj
    if best is None:
        raise NoFeasibleTrajectoryError("every candidate violates the input polytope or collides")
    return best_clear if best_clear is not None else best


def dump_candidates(path, cycle: int, candidates: Sequence[Trajectory], append: bool = True) -> None:
    """Append one row per candidate and step: states, inputs, cost and check flags."""
    new = not append
    try:
        new = new or open(path).read(1) == ""
    except FileNotFoundError:
        new = True
    with open(path, "a" if not new else "w", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(["cycle", "candidate", "source", "k", "s", "d", "dpsi", "psidot", "vx", "vy",
                        "Fyf", "Fx", "cost", "feasible", "collision_free"])
        for j, tr in enumerate(candidates):
            for k in range(tr.states.shape[0]):
                u = tr.inputs[k] if k < tr.horizon else (np.nan, np.nan)
                w.writerow([cycle, j, tr.source, k, *(f"{v:.9g}" for v in tr.states[k]),
                            f"{u[0]:.9g}", f"{u[1]:.9g}", f"{tr.cost:.9g}", int(tr.feasible),
                            int(tr.collision_free)])
