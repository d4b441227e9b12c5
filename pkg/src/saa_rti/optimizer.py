"""One real-time iteration around a selected warm start.

The dynamics are linearised along the warm start, the states are
eliminated by forward substitution (condensed form), and the remaining
QP over input deviations and three corridor slacks is solved once.  The
warm start itself, ``(du, sigma) = (0, 0)``, is always feasible because the
corridor is built to contain it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constraints import InputPolytope
from .frenet import Centerline
from .qp import QpProblem, QpSettings, QpSolution, SOLVED, dump_problem, solve
from .sampling import CostWeights, Obstacle, Trajectory
from .vehicle_model import D, NU, NX, S, VX, Jacobians, VehicleParams, linearize

SOFT_COORDS = (S, D, VX)


class CorridorInversionError(ValueError):
    """Corridor bounds cross (``min > max``), which means the road geometry is inconsistent."""


@dataclass(frozen=True)
class CorridorConfig:
    margin: float = 0.2
    ds_back: float = 2.0
    ds_fwd: float = 10.0
    v_max: float = 40.0


@dataclass(frozen=True)
class StateCorridor:
    s_min: np.ndarray
    s_max: np.ndarray
    d_min: np.ndarray
    d_max: np.ndarray
    vx_min: np.ndarray
    vx_max: np.ndarray

    def __post_init__(self):
        for lo, hi in (("s_min", "s_max"), ("d_min", "d_max"), ("vx_min", "vx_max")):
            a = np.asarray(getattr(self, lo), dtype=float)
            b = np.asarray(getattr(self, hi), dtype=float)
            if a.shape != b.shape or not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise ValueError(f"{lo}/{hi} must be finite arrays of equal shape")
            if np.any(a > b):
                raise CorridorInversionError(f"{lo} > {hi} at steps {np.flatnonzero(a > b).tolist()}")
            object.__setattr__(self, lo, a)
            object.__setattr__(self, hi, b)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper bounds of shape (N+1, 3) in the order s, d, vx."""
        lo = np.column_stack([self.s_min, self.d_min, self.vx_min])
        hi = np.column_stack([self.s_max, self.d_max, self.vx_max])
        return lo, hi

    def violation(self, states) -> np.ndarray:
        """Per-step, per-coordinate amount by which ``states`` leave the corridor."""
        x = np.asarray(states, dtype=float)[:, SOFT_COORDS]
        lo, hi = self.bounds()
        return np.maximum(lo - x, 0.0) + np.maximum(x - hi, 0.0)


@dataclass(frozen=True)
class SlackWeights:
    beta: np.ndarray = field(default_factory=lambda: 1e6 * np.eye(3))

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=float)
        if b.shape != (3, 3) or np.linalg.eigvalsh(0.5 * (b + b.T)).min() <= 0:
            raise ValueError("beta must be a 3x3 positive definite matrix")
        object.__setattr__(self, "beta", b)

    def check_dominates(self, weights: CostWeights, ratio: float = 1e3) -> None:
        top = max(np.abs(weights.Q).max(), np.abs(weights.Qf).max(), np.abs(weights.R).max())
        if np.linalg.eigvalsh(self.beta).min() < ratio * top:
            raise ValueError(f"slack penalty must exceed the state/input weights by a factor {ratio:g}")


def passing_side(warm: Trajectory, ob: Obstacle) -> int:
    """+1 if the warm start passes left of the obstacle (larger d), -1 if right."""
    k = int(np.argmin(np.abs(warm.states[:, S] - ob.s)))
    return 1 if warm.states[k, D] >= ob.d else -1


def build_corridor(warm: Trajectory, obstacles: Sequence[Obstacle], centerline: Centerline,
                   cfg: CorridorConfig = CorridorConfig(), r_veh: float = 1.0,
                   side: int | None = None) -> StateCorridor:
    """Soft state bounds around the warm start.

    ``side`` forces the passing side for every obstacle (+1 left, -1 right);
    by default it is read off the warm start.
    """
    xs = warm.states
    s_hat, d_hat, v_hat = xs[:, S], xs[:, D], xs[:, VX]
    w = centerline.width(s_hat)
    if np.any(w <= r_veh):
        raise CorridorInversionError("lane half-width does not exceed the vehicle footprint radius")
    d_min, d_max = -w + r_veh, w - r_veh
    s_min, s_max = s_hat - cfg.ds_back, s_hat + cfg.ds_fwd

    for ob in obstacles:
        reach = ob.r + r_veh
        if np.max(s_hat) < ob.s - reach - cfg.margin and side is None:
            # warm start stops short of the obstacle: cap progress instead of steering round it
            s_max = np.minimum(s_max, ob.s - reach - cfg.margin)
            continue
        window = (s_max + cfg.margin >= ob.s - reach) & (s_min - cfg.margin <= ob.s + reach)
        sd = passing_side(warm, ob) if side is None else side
        if sd > 0:
            d_min = np.where(window, np.maximum(d_min, ob.d + reach + cfg.margin), d_min)
        else:
            d_max = np.where(window, np.minimum(d_max, ob.d - reach - cfg.margin), d_max)

    # the warm start must stay feasible
    return StateCorridor(
        np.minimum(s_min, s_hat), np.maximum(s_max, s_hat),
        np.minimum(d_min, d_hat), np.maximum(d_max, d_hat),
        np.minimum(0.0, v_hat), np.maximum(cfg.v_max, v_hat),
    )


def tracking_corridor(plan: Trajectory, ds: float = 1.0, dd: float = 0.25, dvx: float = 1.0) -> StateCorridor:
    """Tight tube around a plan, for the pure tracking configuration."""
    x = plan.states
    return StateCorridor(x[:, S] - ds, x[:, S] + ds, x[:, D] - dd, x[:, D] + dd,
                         x[:, VX] - dvx, x[:, VX] + dvx)


@dataclass
class CondensedQp:
    """QP over ``z = [du_0 .. du_{N-1} (scaled), sigma]`` plus what is needed to map back."""

    problem: QpProblem
    constant: float
    M: np.ndarray        # (N+1, 6, nz) state sensitivity
    free: np.ndarray     # (N+1, 6) state deviation at z = 0
    input_scale: float
    n_input_rows: int

    @property
    def n_steps(self) -> int:
        return self.M.shape[0] - 1

    def states(self, warm: Trajectory, z) -> np.ndarray:
        return warm.states + self.free + self.M @ z

    def inputs(self, warm: Trajectory, z) -> np.ndarray:
        N = self.n_steps
        return warm.inputs + self.input_scale * np.asarray(z)[: NU * N].reshape(N, NU)

    def cost(self, z) -> float:
        return self.problem.objective(z) + self.constant


def _per_step(ref, n: int, width: int) -> np.ndarray:
    ref = np.asarray(ref, dtype=float)
    return np.broadcast_to(ref, (n, width)) if ref.ndim == 1 else ref


def assemble_qp(warm: Trajectory, corridor: StateCorridor, poly: InputPolytope, jac: Jacobians,
                weights: CostWeights, slack_w: SlackWeights, x_t, x_ref, u_ref=None,
                input_scale: float = 1e3) -> CondensedQp:
    """Condensed QP whose objective plus ``constant`` equals the horizon cost."""
    N = warm.horizon
    nzu = NU * N
    nz = nzu + 3
    A, B, c = jac
    assert A.shape == (N, NX, NX) and B.shape == (N, NX, NU) and c.shape == (N, NX)
    xs, us = warm.states, warm.inputs
    x_ref = _per_step(x_ref, N + 1, NX)
    u_ref = np.zeros((N, NU)) if u_ref is None else _per_step(u_ref, N, NU)

    # forward substitution: dx_k = M_k z + f_k
    M = np.zeros((N + 1, NX, nz))
    f = np.zeros((N + 1, NX))
    f[0] = np.asarray(x_t, dtype=float) - xs[0]
    defect = c - xs[1:]
    for k in range(N):
        M[k + 1] = A[k] @ M[k]
        M[k + 1][:, NU * k:NU * (k + 1)] += input_scale * B[k]
        f[k + 1] = A[k] @ f[k] + defect[k]

    Qs = np.concatenate([np.broadcast_to(weights.Q, (N, NX, NX)), weights.Qf[None]])
    e0 = xs + f - x_ref
    QM = np.matmul(Qs, M).reshape(-1, nz)
    Mflat = M.reshape(-1, nz)
    P = 2.0 * (Mflat.T @ QM)
    q = 2.0 * (QM.T @ e0.reshape(-1))
    du0 = us - u_ref
    R = weights.R
    for k in range(N):
        sl = slice(NU * k, NU * (k + 1))
        P[sl, sl] += 2.0 * input_scale**2 * R
        q[sl] += 2.0 * input_scale * (R @ du0[k])
    P[nzu:, nzu:] += 2.0 * slack_w.beta
    P = 0.5 * (P + P.T)
    const = float(np.einsum("ki,kij,kj->", e0, Qs, e0) + np.einsum("ki,ij,kj->", du0, R, du0))

    # hard input rows: H (u_hat + F du) <= h
    H, h = poly.H, poly.h
    nh = len(h)
    A_in = np.zeros((N * nh, nz))
    for k in range(N):
        A_in[nh * k:nh * (k + 1), NU * k:NU * (k + 1)] = input_scale * H
    u_in = (h[None, :] - us @ H.T).reshape(-1)
    l_in = np.full(N * nh, -np.inf)

    # soft corridor rows, k = 0..N: x - sigma <= max and x + sigma >= min
    lo, hi = corridor.bounds()
    Msoft = M[:, SOFT_COORDS, :]                       # (N+1, 3, nz)
    base = (xs + f)[:, SOFT_COORDS]                    # (N+1, 3)
    sig = np.zeros((3, nz))
    sig[:, nzu:] = np.eye(3)
    A_up = (Msoft - sig[None]).reshape(-1, nz)
    A_lo = (Msoft + sig[None]).reshape(-1, nz)
    u_up = (hi - base).reshape(-1)
    l_lo = (lo - base).reshape(-1)
    inf = np.full(u_up.size, np.inf)

    A_sig = np.zeros((3, nz))
    A_sig[:, nzu:] = np.eye(3)
    A_all = np.vstack([A_in, A_up, A_lo, A_sig])
    l_all = np.concatenate([l_in, -inf, l_lo, np.zeros(3)])
    u_all = np.concatenate([u_in, u_up, inf, np.full(3, np.inf)])
    return CondensedQp(QpProblem(P, q, A_all, l_all, u_all), const, M, f, input_scale, N * nh)


def constraint_violation(prob: QpProblem, z) -> float:
    Az = prob.A @ np.asarray(z, dtype=float)
    return float(max(np.max(prob.l - Az, initial=0.0), np.max(Az - prob.u, initial=0.0), 0.0))


@dataclass(frozen=True)
class OptimizerConfig:
    corridor: CorridorConfig = CorridorConfig()
    slack: SlackWeights = SlackWeights()
    qp: QpSettings = QpSettings()
    input_scale: float = 1e3
    fallback_factor: float = 1e3
    r_veh: float = 1.0


@dataclass
class OptimalTrajectory:
    states: np.ndarray
    inputs: np.ndarray
    slacks: np.ndarray
    objective: float
    warm_objective: float
    qp: QpSolution
    corridor: StateCorridor
    warm_violation: float
    raw_objective: float = np.nan
    used_fallback: bool = False
    n_linearizations: int = 1
    n_qp_solves: int = 1

    @property
    def u0(self) -> np.ndarray:
        return self.inputs[0]


def _hard_input_scale(poly: InputPolytope, u_hat, u_new) -> float:
    """Largest ``t`` in [0, 1] with ``u_hat + t (u_new - u_hat)`` inside the polytope at every step."""
    H, h = poly.H, poly.h
    base = u_hat @ H.T - h            # <= 0 when the warm inputs are feasible
    step = (u_new - u_hat) @ H.T
    t = 1.0
    pos = step > 0
    if np.any(pos):
        t = min(t, float(np.min(np.maximum(-base[pos], 0.0) / step[pos])))
    return max(t, 0.0)


def optimize(warm: Trajectory, x_t, poly: InputPolytope, obstacles: Sequence[Obstacle], centerline: Centerline,
             params: VehicleParams, Ts: float, weights: CostWeights, x_ref, cfg: OptimizerConfig = OptimizerConfig(),
             u_ref=None, corridor: StateCorridor | None = None, side: int | None = None,
             dump_path=None) -> OptimalTrajectory:
    """Single linearise-and-solve step around ``warm``."""
    s_hat = warm.states[:-1, S]
    jac = linearize(warm.states[:-1], warm.inputs, Ts, centerline.curvature(s_hat), params,
                    centerline.curvature_slope(s_hat))
    if corridor is None:
        corridor = build_corridor(warm, obstacles, centerline, cfg.corridor, cfg.r_veh, side)
    cq = assemble_qp(warm, corridor, poly, jac, weights, cfg.slack, x_t, x_ref, u_ref, cfg.input_scale)
    prob = cq.problem
    if dump_path is not None:
        dump_problem(prob, dump_path)
    z0 = np.zeros(prob.n)
    warm_violation = constraint_violation(prob, z0)
    warm_obj = cq.cost(z0)

    sol = solve(prob, warm=(z0, None), settings=cfg.qp)
    tol = cfg.qp.eps_abs + cfg.qp.eps_rel
    bad = (not np.all(np.isfinite(sol.z)) or
           (sol.status != SOLVED and max(sol.primal_residual, sol.dual_residual) > cfg.fallback_factor * tol))
    raw_obj = cq.cost(sol.z) if np.all(np.isfinite(sol.z)) else np.inf
    if bad:
        z = z0
    else:
        # pull back along the segment to the (feasible) warm start so inputs are exactly admissible
        t = _hard_input_scale(poly, warm.inputs, cq.inputs(warm, sol.z))
        z = t * sol.z
        if cq.cost(z) > warm_obj:
            z = z0
    sigma = np.maximum(z[-3:], 0.0)
    return OptimalTrajectory(
        states=cq.states(warm, z), inputs=cq.inputs(warm, z), slacks=sigma,
        objective=cq.cost(z), warm_objective=warm_obj, qp=sol, corridor=corridor,
        warm_violation=warm_violation, raw_objective=raw_obj, used_fallback=bad,
    )
