"""Paired-seed Monte Carlo batches over obstacle draws and initial conditions."""
from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .runner import run_closed_loop
from .scenario import InitialState, ObstacleSpec, Scenario
from .plant import FrictionField


@dataclass(frozen=True)
class RunSummary:
    strategy: str
    condition: str
    index: int
    J_cl: float
    outcome: str
    accident: bool
    n_qp_cycles: int = 0            # cycles that assembled a QP (emergency braking does not)
    max_warm_violation: float = 0.0
    n_cost_increase: int = 0        # cycles where the optimised cost exceeded the warm start's


@dataclass(frozen=True)
class Aggregate:
    strategy: str
    condition: str
    n: int
    J_mean: float
    P_acc: float
    J_ci: float
    P_ci: float


def draw_scenario(base: Scenario, index: int, seed: int, mu: float | None = None) -> Scenario:
    """Run ``index`` of a batch: the draw depends only on ``(seed, index)``, never on the strategy."""
    mc = base.monte_carlo
    rng = np.random.default_rng([seed, index])
    s_ahead = float(rng.uniform(*mc.obstacle_s_range))
    d_obs = float(rng.uniform(*mc.obstacle_d_range))
    ic = dict(mc.initial_conditions[index % len(mc.initial_conditions)])
    road = dataclasses.replace(base.road, **ic.get("road", {}))
    initial = InitialState(s=base.initial.s, d=base.initial.d, vx=float(ic.get("vx", base.initial.vx)))
    r_obs = base.obstacles[0].r if base.obstacles else 0.5
    obstacles = (ObstacleSpec(s_ahead, d_obs, r_obs, base.obstacles[0].appear_time if base.obstacles else 0.0),)
    friction = base.friction if mu is None else FrictionField.constant(mu)
    return dataclasses.replace(base, road=road, initial=initial, obstacles=obstacles, friction=friction,
                               seed=seed, name=f"{base.name}-{index}")


def _one(args) -> RunSummary:
    base, strategy, condition, mu, index, seed = args
    scn = draw_scenario(base, index, seed, mu)
    res = run_closed_loop(scn, strategy)
    qp = [c for c in res.cycles if not c.emergency]
    return RunSummary(strategy, condition, index, res.J_cl, res.outcome, res.accident, len(qp),
                      max((c.warm_violation for c in qp), default=0.0),
                      sum(c.opt_cost > c.warm_cost for c in qp))


def aggregate(runs: Sequence[RunSummary]) -> list[Aggregate]:
    """Mean cost over accident-free runs and accident probability, per (strategy, condition)."""
    keys = sorted({(r.strategy, r.condition) for r in runs}, key=lambda k: (k[1], k[0]))
    out = []
    for strategy, condition in keys:
        rs = [r for r in runs if r.strategy == strategy and r.condition == condition]
        n = len(rs)
        J = np.array([r.J_cl for r in rs if not r.accident])
        p = sum(r.accident for r in rs) / n
        J_mean = float(J.mean()) if J.size else float("nan")
        J_ci = float(1.96 * J.std(ddof=1) / np.sqrt(J.size)) if J.size > 1 else 0.0
        P_ci = float(1.96 * np.sqrt(p * (1 - p) / n))
        out.append(Aggregate(strategy, condition, n, J_mean, p, J_ci, P_ci))
    return out


def run_monte_carlo(base: Scenario, n_runs: int, seed: int, strategies: Sequence[str],
                    conditions: Sequence[tuple[str, float]] | None = None, jobs: int = 1):
    """Return ``(per-run summaries, aggregates)``; results do not depend on ``jobs``."""
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    conds = list(base.monte_carlo.conditions if conditions is None else conditions)
    tasks = [(base, st, name, mu, i, seed) for name, mu in conds for st in strategies for i in range(n_runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_one, tasks, chunksize=4))
    else:
        runs = [_one(t) for t in tasks]
    return runs, aggregate(runs)
