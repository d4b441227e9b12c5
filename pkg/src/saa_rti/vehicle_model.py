"""Dynamic bicycle model in the road-aligned (Frenet) frame.

State ``x = [s, d, dpsi, psidot, vx, vy]``, input ``u = [Fyf, Fx]``.  All
functions broadcast over leading dimensions so a batch of candidate
trajectories can be propagated in one call.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

NX = 6
NU = 2

# Index names for readability in the rest of the package.
S, D, DPSI, PSIDOT, VX, VY = range(NX)
FYF, FX = range(NU)

EPS_FRAME = 1e-6


class SingularFrameError(ValueError):
    """Raised when ``1 - d * kappa`` vanishes (invalid Frenet projection)."""


@dataclass(frozen=True)
class VehicleParams:
    """Static vehicle parameters (defaults: mid-size passenger car).

    ``v_guard`` is the low-speed floor used in the rear slip-angle
    denominator.  Below roughly 7 m/s the linear rear tire makes the
    forward-Euler map at Ts = 0.05 s expansive, so the prediction model
    uses 8 m/s, and the simulation plant shares it.
    """

    m: float = 1500.0
    Iz: float = 2250.0
    lf: float = 1.04
    lr: float = 1.42
    Caf: float = 160e3
    Car: float = 180e3
    g: float = 9.81
    v_guard: float = 8.0

    def __post_init__(self):
        for name in ("m", "Iz", "lf", "lr", "Caf", "Car", "g", "v_guard"):
            if not getattr(self, name) > 0:
                raise ValueError(f"VehicleParams.{name} must be positive")

    @property
    def wheelbase(self) -> float:
        return self.lf + self.lr

    @property
    def Fzf(self) -> float:
        return self.m * self.g * self.lr / self.wheelbase

    @property
    def Fzr(self) -> float:
        return self.m * self.g * self.lf / self.wheelbase

    @property
    def Fz(self) -> float:
        return self.Fzf + self.Fzr


class VehicleState(NamedTuple):
    s: float
    d: float
    dpsi: float
    psidot: float
    vx: float
    vy: float


class ControlInput(NamedTuple):
    Fyf: float
    Fx: float


class Jacobians(NamedTuple):
    """Affine model ``x+ ~ A (x - x_ref) + B (u - u_ref) + c``."""

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray


def _frame_denominator(d, kappa):
    den = 1.0 - d * kappa
    if np.any(np.abs(den) < EPS_FRAME):
        raise SingularFrameError(f"1 - d*kappa = {np.min(np.abs(den)):.3e} is singular")
    return den


def rear_lateral_force(x, params: VehicleParams, v_guard: float | None = None):
    """Linear rear tire: ``-Car * atan((vy - lr*psidot) / max(vx, v_guard))``."""
    x = np.asarray(x, dtype=float)
    guard = params.v_guard if v_guard is None else v_guard
    vx = np.maximum(x[..., VX], guard)
    alpha_r = np.arctan((x[..., VY] - params.lr * x[..., PSIDOT]) / vx)
    return -params.Car * alpha_r


def steady_cornering_vy(vx: float, psidot: float, params: VehicleParams) -> float:
    """Lateral velocity at which the linear rear tire carries its share of a steady turn."""
    if vx <= 0.0:
        return 0.0
    Fyr = params.m * vx * psidot * params.lf / (params.lf + params.lr)
    return float(params.lr * psidot - max(vx, params.v_guard) * np.tan(Fyr / params.Car))


def yaw_balance_input(x, params: VehicleParams) -> np.ndarray:
    """Input with zero yaw acceleration and zero longitudinal force at ``x``."""
    Fyr = float(rear_lateral_force(x, params))
    return np.array([params.lr * Fyr / params.lf, 0.0])


def continuous_dynamics(x, u, kappa_c, params: VehicleParams, rear_force=None):
    """Right-hand side of the road-aligned bicycle model.

    ``rear_force`` overrides the rear lateral tire force; by default the
    linear tire of :func:`rear_lateral_force` is used.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    d, dpsi, r, vx, vy = x[..., D], x[..., DPSI], x[..., PSIDOT], x[..., VX], x[..., VY]
    Fyf, Fx = u[..., FYF], u[..., FX]
    Fyr = rear_lateral_force(x, params) if rear_force is None else rear_force

    den = _frame_denominator(d, kappa_c)
    c, sn = np.cos(dpsi), np.sin(dpsi)
    sdot = (vx * c - vy * sn) / den
    out = np.empty(np.broadcast_shapes(x.shape, u.shape[:-1] + (NX,)))
    out[..., S] = sdot
    out[..., D] = vx * sn + vy * c
    out[..., DPSI] = r - kappa_c * sdot
    out[..., PSIDOT] = (params.lf * Fyf - params.lr * Fyr) / params.Iz
    out[..., VX] = Fx / params.m
    out[..., VY] = (Fyf + Fyr) / params.m - vx * r
    return out


def discrete_step(x, u, Ts: float, kappa_fn: Callable, params: VehicleParams):
    """Forward-Euler step ``x + Ts * f_c(x, u)`` with curvature ``kappa_fn(s)``."""
    x = np.asarray(x, dtype=float)
    kappa = kappa_fn(x[..., S])
    return x + Ts * continuous_dynamics(x, u, kappa, params)


def linearize(x_ref, u_ref, Ts: float, kappa_c, params: VehicleParams, dkappa_ds=0.0) -> Jacobians:
    """Analytic Jacobians of the forward-Euler map at ``(x_ref, u_ref)``.

    Broadcasts: ``x_ref`` of shape (..., 6) gives ``A`` of shape (..., 6, 6).
    ``dkappa_ds`` is the curvature slope at ``s`` for roads whose curvature
    varies along the arc; it defaults to a locally constant curvature.
    """
    x = np.asarray(x_ref, dtype=float)
    u = np.asarray(u_ref, dtype=float)
    if np.any(x[..., VX] < -1e-9):
        raise ValueError("linearization requires vx >= 0 (up to rounding)")
    kappa = np.asarray(kappa_c, dtype=float)
    dk = np.asarray(dkappa_ds, dtype=float)
    p = params
    d, dpsi, r, vx, vy = x[..., D], x[..., DPSI], x[..., PSIDOT], x[..., VX], x[..., VY]

    den = _frame_denominator(d, kappa)
    c, sn = np.cos(dpsi), np.sin(dpsi)
    vt = vx * c - vy * sn
    vn = vx * sn + vy * c
    sdot = vt / den

    # rear tire partials
    above = vx > p.v_guard
    v = np.where(above, vx, p.v_guard)
    z = vy - p.lr * r
    q = v * v + z * z
    dF_dz = -p.Car * v / q
    dF_dvx = np.where(above, p.Car * z / q, 0.0)

    shape = x.shape[:-1]
    J = np.zeros(shape + (NX, NX))
    # sdot
    J[..., S, S] = vt * d * dk / den**2
    J[..., S, D] = vt * kappa / den**2
    J[..., S, DPSI] = -vn / den
    J[..., S, VX] = c / den
    J[..., S, VY] = -sn / den
    # ddot
    J[..., D, DPSI] = vt
    J[..., D, VX] = sn
    J[..., D, VY] = c
    # dpsi dot = psidot - kappa(s) * sdot
    J[..., DPSI, :] = -kappa[..., None] * J[..., S, :]
    J[..., DPSI, S] -= dk * sdot
    J[..., DPSI, PSIDOT] += 1.0
    # psiddot
    J[..., PSIDOT, PSIDOT] = p.lr * p.lr * dF_dz / p.Iz
    J[..., PSIDOT, VX] = -p.lr * dF_dvx / p.Iz
    J[..., PSIDOT, VY] = -p.lr * dF_dz / p.Iz
    # vx dot has no state dependence
    # vy dot
    J[..., VY, PSIDOT] = -p.lr * dF_dz / p.m - vx
    J[..., VY, VX] = dF_dvx / p.m - r
    J[..., VY, VY] = dF_dz / p.m

    Ju = np.zeros(shape + (NX, NU))
    Ju[..., PSIDOT, FYF] = p.lf / p.Iz
    Ju[..., VX, FX] = 1.0 / p.m
    Ju[..., VY, FYF] = 1.0 / p.m

    A = np.eye(NX) + Ts * J
    B = Ts * Ju
    f = x + Ts * continuous_dynamics(x, u, kappa, p)
    return Jacobians(A, B, f)


def rollout(x0, inputs, Ts: float, kappa_fn: Callable, params: VehicleParams) -> np.ndarray:
    """Propagate the Euler model through an input sequence of shape (N, 2)."""
    inputs = np.asarray(inputs, dtype=float)
    states = np.empty((len(inputs) + 1, NX))
    states[0] = x0
    for k, u in enumerate(inputs):
        states[k + 1] = discrete_step(states[k], u, Ts, kappa_fn, params)
    return states
