"""Closed-loop simulation of one scenario under one strategy."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..vehicle_model import D, FX, FYF, S, VX, VY, yaw_balance_input
from .controllers import SAA_RTI, SAA_RTI_STATIC, Controller
from .estimator import STATIC, EstimatorConfig, FrictionEstimator
from .io import write_trace
from .plant import plant_step
from .scenario import Scenario

COLLIDED = "collided"
OFF_ROAD = "off-road"
STOPPED = "stopped-safe"
PASSED = "passed-safe"
TIMEOUT = "timeout"
ACCIDENTS = (COLLIDED, OFF_ROAD)


@dataclass
class CycleLog:
    """Per-cycle quantities the structural guarantees are checked against."""

    warm_violation: float
    warm_cost: float
    opt_cost: float
    raw_opt_cost: float
    input_violation: float
    emergency: bool
    source: str
    n_linearizations: int
    n_qp_solves: int
    qp_status: str


@dataclass
class RunResult:
    strategy: str
    outcome: str
    J_cl: float
    trace: list
    cycles: list = field(default_factory=list)
    rms_front_discrepancy: float = 0.0
    peak_sideslip: float = 0.0
    end_time: float = 0.0

    @property
    def accident(self) -> bool:
        return self.outcome in ACCIDENTS

    def column(self, name: str) -> np.ndarray:
        from .io import TRACE_COLUMNS
        i = TRACE_COLUMNS.index(name)
        return np.array([float(r[i]) for r in self.trace])


def _event(x, t, obstacles, centerline, r_veh, target, duration):
    for ob, t_appear in obstacles:
        if t_appear <= t + 1e-12 and np.hypot(x[S] - ob.s, x[D] - ob.d) <= r_veh + ob.r:
            return COLLIDED
    if x[S] >= centerline.s[-1] or abs(x[D]) + r_veh > centerline.width(x[S]):
        return OFF_ROAD if x[S] < centerline.s[-1] else PASSED
    if target.kind == "stop" and x[VX] <= target.stop_speed:
        return STOPPED
    return None


def run_closed_loop(scn: Scenario, strategy: str = SAA_RTI, trace_path=None, timing: bool = False,
                    dump_candidates_to=None, dump_qp_to=None) -> RunResult:
    """Run the control loop until the first terminal event or the scenario duration."""
    cfg = scn.controller
    params = scn.vehicle
    cl = scn.centerline()
    est_cfg = scn.estimator
    if strategy == SAA_RTI_STATIC:
        est_cfg = EstimatorConfig(STATIC, est_cfg.mu_asm, est_cfg.delay)
    estimator = FrictionEstimator(est_cfg, scn.friction)
    x = scn.initial_state()
    # the vehicle was holding its line before the first cycle
    ctrl = Controller(scn, strategy, dump_candidates_to, dump_qp_to, u_init=yaw_balance_input(x, params))
    weights = ctrl.weights
    beta = ctrl.opt_cfg.slack.beta
    x_ref = scn.reference_state()
    obstacles = scn.obstacle_list()
    dt = cfg.Ts / scn.plant_substeps
    share = params.Fzf / params.Fz

    rows, cycles = [], []
    J_cl = 0.0
    sq_disc, n_disc, peak_beta = 0.0, 0, 0.0
    outcome = None
    n_cycles = int(round(scn.duration / cfg.Ts))
    t = 0.0
    for i in range(n_cycles):
        t = i * cfg.Ts
        known = [ob for ob, ta in obstacles if ta <= t + 1e-12]
        mu_est = estimator.estimate(t, x[S]).mu
        mu_act = scn.friction.at(x[S])
        res = ctrl.step(x, mu_est, known, timing)
        u = res.u
        e = x - x_ref
        J_step = float(e @ weights.Q @ e + u @ weights.R @ u + res.slacks @ beta @ res.slacks)
        J_cl += J_step
        cycles.append(CycleLog(res.warm_violation, res.warm_cost, res.opt_cost, res.raw_opt_cost,
                               res.poly.max_violation(u), res.emergency, res.source, res.n_linearizations,
                               res.n_qp_solves, res.opt.qp.status if res.opt is not None else "none"))

        x_cycle = x.copy()
        forces0 = None
        for j in range(scn.plant_substeps):
            x, f = plant_step(x, u, scn.friction.at(x[S]), dt, params, cl)
            if forces0 is None:
                forces0 = f
            sq_disc += (f.Fyf - u[FYF]) ** 2 + (f.Fxf - share * u[FX]) ** 2
            n_disc += 1
            if x[VX] > 1.0:
                peak_beta = max(peak_beta, abs(np.arctan2(x[VY], x[VX])))
            outcome = _event(x, t + (j + 1) * dt, obstacles, cl, cfg.r_veh, scn.target, scn.duration)
            if outcome:
                break
        rows.append((t, *x_cycle, u[FYF], u[FX], forces0.Fyf, forces0.Fxf, forces0.Fyr, mu_est, mu_act,
                     *res.slacks, res.qp_iters, res.cycle_time_ms, J_step))
        if outcome:
            break
    if outcome is None:
        outcome = PASSED if scn.target.kind == "speed" else TIMEOUT

    result = RunResult(strategy, outcome, J_cl, rows, cycles,
                       float(np.sqrt(sq_disc / max(n_disc, 1))), float(peak_beta), t + cfg.Ts)
    if trace_path is not None:
        write_trace(trace_path, rows)
    return result
