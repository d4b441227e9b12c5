"""Road centerline, planner-state transforms and Cartesian unprojection."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .vehicle_model import (
    D, DPSI, PSIDOT, S, VX, VY, VehicleParams, _frame_denominator,
    continuous_dynamics,
)

EPS_V = 0.1
RESOLUTION = 0.5

# 3-point Gauss-Legendre nodes/weights on [0, 1]
_GL_X = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_GL_W = np.array([5.0, 8.0, 5.0]) / 18.0


class DegenerateVelocityError(ValueError):
    """Planner state has (near) zero planar speed, heading is undefined."""


class PlannerState(NamedTuple):
    s: float
    d: float
    sdot: float
    ddot: float
    sddot: float
    dddot: float


class Pose(NamedTuple):
    x: float
    y: float
    heading: float


@dataclass(frozen=True)
class Centerline:
    """Lane centerline sampled in arc length.

    Curvature and half-width are interpolated piecewise-linearly between
    the samples and held constant outside the sampled range.
    """

    s: np.ndarray
    kappa: np.ndarray
    half_width: np.ndarray
    x0: float = 0.0
    y0: float = 0.0
    heading0: float = 0.0
    _heading: np.ndarray = field(init=False, repr=False, compare=False)
    _xy: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        kappa = np.broadcast_to(np.asarray(self.kappa, dtype=float), s.shape).copy()
        w = np.broadcast_to(np.asarray(self.half_width, dtype=float), s.shape).copy()
        if s.ndim != 1 or len(s) < 2:
            raise ValueError("centerline needs at least two arc-length samples")
        if np.any(np.diff(s) <= 0):
            raise ValueError("arc-length samples must be strictly increasing")
        if np.any(w <= 0):
            raise ValueError("lane half-width must be positive")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "half_width", w)

        # heading is the exact integral of the piecewise-linear curvature
        ds = np.diff(s)
        heading = self.heading0 + np.concatenate([[0.0], np.cumsum(0.5 * ds * (kappa[1:] + kappa[:-1]))])
        object.__setattr__(self, "_heading", heading)
        xy = np.zeros((len(s), 2))
        xy[0] = (self.x0, self.y0)
        for i in range(len(s) - 1):
            xy[i + 1] = xy[i] + self._advance(i, ds[i])
        object.__setattr__(self, "_xy", xy)

    @classmethod
    def from_breakpoints(cls, breakpoints: Sequence[Sequence[float]], resolution: float = RESOLUTION, **anchor):
        """Build from ``(s, kappa, half_width)`` breakpoints, resampled at ``resolution``."""
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 2 or bp.shape[1] != 3 or len(bp) < 2:
            raise ValueError("breakpoints must be at least two rows of (s, kappa, half_width)")
        if np.any(np.diff(bp[:, 0]) <= 0):
            raise ValueError("breakpoint arc lengths must be strictly increasing")
        n = int(np.ceil((bp[-1, 0] - bp[0, 0]) / resolution - 1e-9))
        s = np.linspace(bp[0, 0], bp[-1, 0], n + 1)
        s = np.union1d(s, bp[:, 0])
        return cls(s, np.interp(s, bp[:, 0], bp[:, 1]), np.interp(s, bp[:, 0], bp[:, 2]), **anchor)

    @classmethod
    def straight(cls, length: float = 400.0, half_width: float = 3.75, **anchor):
        return cls.from_breakpoints([(0.0, 0.0, half_width), (length, 0.0, half_width)], **anchor)

    @classmethod
    def constant_curve(cls, radius: float = 100.0, length: float = 400.0, half_width: float = 3.75, **anchor):
        k = 1.0 / radius
        return cls.from_breakpoints([(0.0, k, half_width), (length, k, half_width)], **anchor)

    @classmethod
    def tight_curve(cls, radius: float = 35.0, length: float = 400.0, half_width: float = 3.75, **anchor):
        return cls.constant_curve(radius, length, half_width, **anchor)

    def curvature(self, s):
        return np.interp(s, self.s, self.kappa)

    def curvature_slope(self, s):
        s = np.asarray(s, dtype=float)
        slopes = np.diff(self.kappa) / np.diff(self.s)
        idx = np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, len(slopes) - 1)
        inside = (s >= self.s[0]) & (s < self.s[-1])
        return np.where(inside, slopes[idx], 0.0)

    def width(self, s):
        return np.interp(s, self.s, self.half_width)

    def _index(self, s):
        return np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, len(self.s) - 2)

    def heading(self, s):
        s = np.asarray(s, dtype=float)
        i = self._index(s)
        h = s - self.s[i]
        return self._heading[i] + 0.5 * h * (self.kappa[i] + self.curvature(s))

    def _advance(self, i: int, h: float) -> np.ndarray:
        """Displacement along the centerline from sample ``i`` over arc length ``h``."""
        k_i = self.kappa[i]
        slope = (self.kappa[i + 1] - k_i) / (self.s[i + 1] - self.s[i])
        out = np.zeros(2)
        n_sub = max(1, int(np.ceil(h / 0.25)))
        edges = np.linspace(0.0, h, n_sub + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            t = a + (b - a) * _GL_X
            th = self._heading[i] + k_i * t + 0.5 * slope * t * t
            out += (b - a) * np.array([_GL_W @ np.cos(th), _GL_W @ np.sin(th)])
        return out

    def point(self, s: float) -> tuple[np.ndarray, float]:
        """Cartesian position and tangent heading of the centerline at ``s``."""
        if s < self.s[0] - 1e-9 or s > self.s[-1] + 1e-9:
            raise ValueError(f"s = {s} outside centerline domain [{self.s[0]}, {self.s[-1]}]")
        i = int(self._index(s))
        return self._xy[i] + self._advance(i, s - self.s[i]), float(self.heading(s))


def vehicle_to_planner(x, u, centerline: Centerline, params: VehicleParams) -> PlannerState:
    """Map a vehicle state to ``[s, d, sdot, ddot, sddot, dddot]``.

    Velocities come straight from the kinematic rows of the model; the
    accelerations differentiate those rows along the dynamics under ``u``.
    """
    x = np.asarray(x, dtype=float)
    s, d, dpsi, vx, vy = x[S], x[D], x[DPSI], x[VX], x[VY]
    kappa = float(centerline.curvature(s))
    dkappa = float(centerline.curvature_slope(s))
    den = float(_frame_denominator(d, kappa))
    f = continuous_dynamics(x, u, kappa, params)
    c, sn = np.cos(dpsi), np.sin(dpsi)
    vt = vx * c - vy * sn
    vn = vx * sn + vy * c
    sdot = vt / den
    ddot = vn
    dpsi_dot = f[DPSI]
    vt_dot = f[VX] * c - f[VY] * sn - dpsi_dot * vn
    vn_dot = f[VX] * sn + f[VY] * c + dpsi_dot * vt
    den_dot = -(ddot * kappa + d * dkappa * sdot)
    sddot = vt_dot / den - vt * den_dot / den**2
    return PlannerState(float(s), float(d), float(sdot), float(ddot), float(sddot), float(vn_dot))


def planner_to_vehicle(gamma, centerline: Centerline, eps_v: float = EPS_V) -> np.ndarray:
    """Reconstruct a vehicle state from a planner state.

    Lateral velocity is set to zero and all of it is absorbed into the
    relative heading, which makes the path kinematically exact.  Yaw rate
    is the centerline rotation plus the rate of change of that heading.
    Broadcasts over leading dimensions of ``gamma`` (..., 6).
    """
    g = np.asarray(gamma, dtype=float)
    s, d, sdot, ddot, sddot, dddot = (g[..., i] for i in range(6))
    kappa = centerline.curvature(s)
    dkappa = centerline.curvature_slope(s)
    den = _frame_denominator(d, kappa)
    a = sdot * den
    b = ddot
    v = np.hypot(a, b)
    if np.any(v < eps_v):
        raise DegenerateVelocityError(f"planar speed {np.min(v):.3g} m/s below {eps_v}")
    a_dot = sddot * den - sdot * (ddot * kappa + d * dkappa * sdot)
    dpsi_rate = (a * dddot - b * a_dot) / (v * v)
    out = np.zeros(g.shape)
    out[..., S] = s
    out[..., D] = d
    out[..., DPSI] = np.arctan2(b, a)
    out[..., PSIDOT] = kappa * sdot + dpsi_rate
    out[..., VX] = v
    return out


def frenet_to_cartesian(x, centerline: Centerline) -> Pose:
    """Planar pose of a vehicle state, for plotting."""
    x = np.asarray(x, dtype=float)
    base, th = centerline.point(float(x[S]))
    p = base + x[D] * np.array([-np.sin(th), np.cos(th)])
    return Pose(float(p[0]), float(p[1]), float(th + x[DPSI]))


def road_edges(centerline: Centerline, n: int = 400) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cartesian polylines of the centerline and both lane edges."""
    ss = np.linspace(centerline.s[0], centerline.s[-1], n)
    mid, left, right = [], [], []
    for s in ss:
        p, th = centerline.point(s)
        nrm = np.array([-np.sin(th), np.cos(th)])
        w = centerline.width(s)
        mid.append(p)
        left.append(p + w * nrm)
        right.append(p - w * nrm)
    return np.array(mid), np.array(left), np.array(right)
