"""Per-cycle control laws sharing the planner and QP machinery."""
from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..constraints import InputPolytope, build_input_constraints
from ..optimizer import OptimalTrajectory, build_corridor, optimize, passing_side, tracking_corridor
from ..sampling import (
    CostWeights, NoFeasibleTrajectoryError, Obstacle, Trajectory, default_grid, dump_candidates, sample_trajectories,
    select_trajectory, shift_trajectory,
)
from ..vehicle_model import D, NU, S, VX, rollout
from .scenario import Scenario

SAA_RTI = "saa-rti"
SAA_RTI_STATIC = "saa-rti-nonadaptive"
SSS_MPC = "sss-mpc"
SQP_LEFT = "sqp-oracle-left"
SQP_RIGHT = "sqp-oracle-right"
STRATEGIES = (SAA_RTI, SAA_RTI_STATIC, SSS_MPC, SQP_LEFT, SQP_RIGHT)


@dataclass
class CycleResult:
    u: np.ndarray
    slacks: np.ndarray
    qp_iters: int
    cycle_time_ms: float
    emergency: bool = False
    source: str = ""
    warm_violation: float = 0.0
    warm_cost: float = np.nan
    opt_cost: float = np.nan
    raw_opt_cost: float = np.nan
    n_linearizations: int = 0
    n_qp_solves: int = 0
    poly: InputPolytope | None = None
    warm: Trajectory | None = None
    opt: OptimalTrajectory | None = None


@dataclass
class _Debug:
    candidates_csv: Path | None = None
    qp_dir: Path | None = None
    cycle: int = 0


class Controller:
    """Sample, select, then one linearise-and-solve step (or a variant of it).

    ``strategy`` picks the variant: the SAA-RTI loop, a tracker of the best
    sample, or the fully converged SQP used offline as a reference.
    """

    def __init__(self, scn: Scenario, strategy: str = SAA_RTI, dump_candidates_to=None, dump_qp_to=None,
                 u_init=None):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
        self.scn = scn
        self.strategy = strategy
        self.cfg = scn.controller
        self.params = scn.vehicle
        self.centerline = scn.centerline()
        self.weights = self.cfg.weights.build()
        self.opt_cfg = self.cfg.optimizer_config()
        self.limits = self.cfg.limits(self.params)
        tr = self.cfg.tracker
        self.track_weights = CostWeights.from_diagonals(tr.Q, tr.Qf, tr.R)
        self.x_ref = scn.reference_state()
        self.prev: Trajectory | None = None
        self.u_prev = np.zeros(NU) if u_init is None else np.asarray(u_init, dtype=float).copy()
        self._polys: dict[float, InputPolytope] = {}
        self.debug = _Debug(Path(dump_candidates_to) if dump_candidates_to else None,
                            Path(dump_qp_to) if dump_qp_to else None)
        if self.debug.qp_dir is not None:
            self.debug.qp_dir.mkdir(parents=True, exist_ok=True)
        self.side = {SQP_LEFT: 1, SQP_RIGHT: -1}.get(strategy)

    def polytope(self, mu: float) -> InputPolytope:
        if mu not in self._polys:
            self._polys[mu] = build_input_constraints(mu, self.params, self.limits, self.cfg.n_edges)
        return self._polys[mu]

    def _candidates(self, x, poly: InputPolytope | None = None) -> list[Trajectory]:
        cl = self.centerline
        kappa = float(cl.curvature(x[S]))
        sdot0 = max((x[VX] * np.cos(x[2]) - x[5] * np.sin(x[2])) / (1.0 - x[D] * kappa), 0.0)
        grid = default_grid(sdot0, float(cl.width(x[S])), self.cfg.r_veh, self.cfg.grid)
        # start the plans from an acceleration the current constraints still allow
        u0 = self.u_prev if poly is None else poly.scale_inside(self.u_prev)
        return sample_trajectories(x, u0, grid, cl, self.cfg.N, self.cfg.Ts, self.params, self.cfg.grid,
                                   poly if self.cfg.grid.saturate else None)

    def _shifted_previous(self, x) -> Trajectory | None:
        if self.prev is None:
            return None
        shifted = shift_trajectory(self.prev)
        states = rollout(x, shifted.inputs, self.cfg.Ts, self.centerline.curvature, self.params)
        if not np.all(np.isfinite(states)):
            return None
        return Trajectory(states, shifted.inputs, source="shifted-previous")

    def _optimize(self, warm, x, poly, obstacles, **kw) -> OptimalTrajectory:
        qp_path = None
        if self.debug.qp_dir is not None:
            qp_path = self.debug.qp_dir / f"qp_{self.debug.cycle:05d}.txt"
        return optimize(warm, x, poly, obstacles, self.centerline, self.params, self.cfg.Ts, kw.pop("weights", self.weights),
                        kw.pop("x_ref", self.x_ref), self.opt_cfg, dump_path=qp_path, **kw)

    def step(self, x, mu: float, obstacles: Sequence[Obstacle], timing: bool = False) -> CycleResult:
        t0 = time.perf_counter()
        x = np.asarray(x, dtype=float)
        poly = self.polytope(mu)
        candidates = self._candidates(x, poly)
        shifted = self._shifted_previous(x)
        if self.side is not None:
            # the reference branch only considers warm starts on its own side of every obstacle
            candidates = [c for c in candidates if all(passing_side(c, ob) == self.side for ob in obstacles)]
        try:
            warm = select_trajectory(candidates, shifted, poly, obstacles, self.weights, self.x_ref,
                                     self.centerline, self.cfg.r_veh, self.cfg.corridor.margin)
        except NoFeasibleTrajectoryError:
            warm = None
        if self.debug.candidates_csv is not None:
            dump_candidates(self.debug.candidates_csv, self.debug.cycle, candidates + ([shifted] if shifted else []))

        if warm is None:
            self.prev = None
            u = poly.max_braking()
            self.u_prev = u
            self.debug.cycle += 1
            return CycleResult(u, np.zeros(3), 0, self._elapsed(t0, timing), emergency=True, source="emergency",
                               poly=poly)

        if self.strategy == SSS_MPC:
            opt = self._optimize(warm, x, poly, obstacles, weights=self.track_weights, x_ref=warm.states,
                                 u_ref=warm.inputs, corridor=tracking_corridor(warm, self.cfg.tracker.ds,
                                                                               self.cfg.tracker.dd,
                                                                               self.cfg.tracker.dvx))
            iters, n_qp = opt.qp.iterations, 1
        elif self.side is not None:
            opt, iters, n_qp = self._converge(warm, x, poly, obstacles)
        else:
            opt = self._optimize(warm, x, poly, obstacles)
            iters, n_qp = opt.qp.iterations, 1

        # the tracker keeps its plan; every other variant keeps the optimised trajectory
        kept = warm if self.strategy == SSS_MPC else opt
        self.prev = Trajectory(kept.states, kept.inputs, source="optimal")
        self.u_prev = opt.u0.copy()
        self.debug.cycle += 1
        return CycleResult(opt.u0.copy(), opt.slacks.copy(), iters, self._elapsed(t0, timing), source=warm.source,
                           warm_violation=opt.warm_violation, warm_cost=opt.warm_objective,
                           opt_cost=opt.objective, raw_opt_cost=opt.raw_objective,
                           n_linearizations=n_qp, n_qp_solves=n_qp, poly=poly, warm=warm, opt=opt)

    def _converge(self, warm, x, poly, obstacles):
        """Repeated linearise-and-solve on the nonlinear model until the input update is small.

        The corridor is built once around the initial warm start; rebuilding it
        around each iterate would let it creep into the obstacle.
        """
        corridor = build_corridor(warm, obstacles, self.centerline, self.opt_cfg.corridor, self.opt_cfg.r_veh,
                                  self.side)
        iters = 0
        for n in range(1, self.cfg.sqp_max_iter + 1):
            opt = self._optimize(warm, x, poly, obstacles, corridor=corridor)
            iters += opt.qp.iterations
            step = np.max(np.abs(opt.inputs - warm.inputs)) / self.opt_cfg.input_scale
            if step <= self.cfg.sqp_tol:
                break
            states = rollout(x, opt.inputs, self.cfg.Ts, self.centerline.curvature, self.params)
            if not np.all(np.isfinite(states)) or np.any(states[:, VX] < 0):
                break
            warm = Trajectory(states, opt.inputs, source="sqp-iterate")
        return opt, iters, n

    @staticmethod
    def _elapsed(t0: float, timing: bool) -> float:
        return (time.perf_counter() - t0) * 1e3 if timing else np.nan
