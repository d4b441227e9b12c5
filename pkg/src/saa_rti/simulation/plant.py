"""Nonlinear plant: friction-limited tires and fixed-step RK4 integration."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..constraints import MU_MAX
from ..frenet import Centerline
from ..vehicle_model import FX, FYF, PSIDOT, S, VX, VY, VehicleParams, continuous_dynamics

class RealizedForces(NamedTuple):
    Fyf: float
    Fxf: float
    Fyr: float
    Fxr: float


@dataclass(frozen=True)
class FrictionField:
    """Piecewise-constant friction over arc length: ``values[i]`` holds from ``starts[i]`` on."""

    starts: tuple[float, ...] = (0.0,)
    values: tuple[float, ...] = (0.95,)

    def __post_init__(self):
        if len(self.starts) != len(self.values) or not self.values:
            raise ValueError("friction field needs matching, nonempty starts and values")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise ValueError("friction segment starts must increase")
        if not all(0.0 < v <= MU_MAX for v in self.values):
            raise ValueError(f"friction values must lie in (0, {MU_MAX}]")

    @classmethod
    def constant(cls, mu: float) -> "FrictionField":
        return cls((0.0,), (float(mu),))

    def at(self, s: float) -> float:
        i = int(np.searchsorted(self.starts, s, side="right")) - 1
        return self.values[max(i, 0)]


def split_longitudinal(Fx, params: VehicleParams):
    """Front/rear share of the combined longitudinal force, proportional to static load."""
    share = params.Fzf / params.Fz
    return Fx * share, Fx * (1.0 - share)


def saturate_pair(Fy, Fx, mu: float, Fz: float):
    """Radial projection of an axle force pair onto the circle of radius ``mu * Fz``."""
    cap = mu * Fz
    mag = np.hypot(Fy, Fx)
    k = 1.0 if mag <= cap else cap / mag
    return Fy * k, Fx * k


def saturate_front(Fyf, Fxf, mu: float, Fzf: float):
    return saturate_pair(Fyf, Fxf, mu, Fzf)


def rear_forces(x, Fxr, mu: float, params: VehicleParams):
    """Rear axle: linear lateral tire and longitudinal share, projected together onto the friction circle.

    The slip angle uses the same low-speed floor ``params.v_guard`` as the
    prediction model, so the two tire models differ only by saturation.
    """
    vx = max(x[VX], params.v_guard)
    Fyr = -params.Car * np.arctan((x[VY] - params.lr * x[PSIDOT]) / vx)
    Fyr, Fxr = saturate_pair(Fyr, Fxr, mu, params.Fzr)
    return float(Fyr), float(Fxr)


def realized_forces(x, u_cmd, mu: float, params: VehicleParams) -> RealizedForces:
    Fxf, Fxr = split_longitudinal(u_cmd[FX], params)
    # braking cannot push a stationary vehicle backwards
    if x[VX] <= 0.0:
        Fxf, Fxr = max(Fxf, 0.0), max(Fxr, 0.0)
    Fyf, Fxf = saturate_front(u_cmd[FYF], Fxf, mu, params.Fzf)
    Fyr, Fxr = rear_forces(x, Fxr, mu, params)
    return RealizedForces(float(Fyf), float(Fxf), Fyr, Fxr)


def plant_derivative(x, u_cmd, mu: float, params: VehicleParams, centerline: Centerline):
    f = realized_forces(x, u_cmd, mu, params)
    u = np.array([f.Fyf, f.Fxf + f.Fxr])
    xdot = continuous_dynamics(x, u, centerline.curvature(x[S]), params, rear_force=f.Fyr)
    return xdot, f


def plant_step(x, u_cmd, mu_act: float, dt: float, params: VehicleParams, centerline: Centerline):
    """One RK4 step with saturation re-evaluated at every stage.

    Returns the new state and the realized forces at the start of the step.
    """
    if not dt > 0:
        raise ValueError("plant step must be positive")
    x = np.asarray(x, dtype=float)
    u_cmd = np.asarray(u_cmd, dtype=float)
    k1, forces = plant_derivative(x, u_cmd, mu_act, params, centerline)
    k2, _ = plant_derivative(x + 0.5 * dt * k1, u_cmd, mu_act, params, centerline)
    k3, _ = plant_derivative(x + 0.5 * dt * k2, u_cmd, mu_act, params, centerline)
    k4, _ = plant_derivative(x + dt * k3, u_cmd, mu_act, params, centerline)
    x_next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    x_next[VX] = max(x_next[VX], 0.0)
    return x_next, forces
