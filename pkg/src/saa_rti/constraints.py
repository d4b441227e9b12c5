"""Friction-adaptive input polytope ``U(mu) = U1(mu) & U2``.

``U1(mu)`` is a polygon inscribed in the friction ellipse with half-axes
``mu*Fzf`` (front lateral force) and ``mu*Fz`` (combined longitudinal
force); ``U2`` is the actuator box.  Every halfspace is normalised so its
right-hand side equals one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .vehicle_model import VehicleParams

MU_MAX = 1.5


class EmptyPolytopeError(ValueError):
    pass


@dataclass(frozen=True)
class FrictionEstimate:
    mu: float
    timestamp: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.mu <= MU_MAX:
            raise ValueError(f"friction coefficient {self.mu} outside (0, {MU_MAX}]")


@dataclass(frozen=True)
class ActuatorLimits:
    Fyf_max: float
    Fx_min: float
    Fx_max: float

    def __post_init__(self):
        if not (self.Fyf_max > 0 and self.Fx_min < 0 < self.Fx_max):
            raise ValueError("actuator limits need Fyf_max > 0 and Fx_min < 0 < Fx_max")

    @classmethod
    def default(cls, params: VehicleParams, mu_design: float = 1.2) -> "ActuatorLimits":
        return cls(Fyf_max=0.95 * params.Fzf * mu_design, Fx_min=-16e3, Fx_max=4e3)

    def box_halfspaces(self):
        H = np.array([
            [1.0 / self.Fyf_max, 0.0],
            [-1.0 / self.Fyf_max, 0.0],
            [0.0, 1.0 / self.Fx_max],
            [0.0, 1.0 / self.Fx_min],
        ])
        return H, np.ones(4)


@dataclass(frozen=True)
class InputPolytope:
    """Halfspace set ``{u : H u <= h}`` with vertices kept for plotting and checks."""

    H: np.ndarray
    h: np.ndarray
    mu_used: float
    vertices: np.ndarray

    def contains(self, u, tol: float = 1e-9) -> np.ndarray:
        """Vectorised membership for ``u`` of shape (..., 2)."""
        u = np.asarray(u, dtype=float)
        slack = u @ self.H.T - self.h
        return np.all(slack <= tol * np.abs(self.h), axis=-1)

    def max_violation(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(np.max(u @ self.H.T - self.h, initial=-np.inf))

    def scale_inside(self, u) -> np.ndarray:
        """Radially shrink ``u`` towards the origin until it lies in the polytope."""
        u = np.asarray(u, dtype=float)
        r = float(np.max(self.H @ u / self.h))
        return u / r if r > 1.0 else u.copy()

    def max_braking(self) -> np.ndarray:
        """Most negative ``Fx`` with ``Fyf = 0`` (emergency straight-line braking)."""
        col = self.H[:, 1]
        neg = col < 0
        return np.array([0.0, float(np.max(self.h[neg] / col[neg]))])


def contains(poly: InputPolytope, u, tol: float = 1e-9):
    return poly.contains(u, tol)


def ellipse_vertices(mu: float, Fzf: float, Fz: float, n_edges: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(n_edges) / n_edges
    return np.column_stack([mu * Fzf * np.cos(theta), mu * Fz * np.sin(theta)])


def _halfspaces_from_ccw(vertices: np.ndarray):
    nxt = np.roll(vertices, -1, axis=0)
    edge = nxt - vertices
    normal = np.column_stack([edge[:, 1], -edge[:, 0]])
    offset = np.einsum("ij,ij->i", normal, vertices)
    return normal / offset[:, None], np.ones(len(vertices))


def inscribe_ellipse_polytope(mu: float, Fzf: float, Fz: float, n_edges: int = 16) -> InputPolytope:
    """Polygon with ``n_edges`` vertices on the friction ellipse, equally spaced in parameter angle."""
    if not (mu > 0 and Fzf > 0 and Fz > 0):
        raise ValueError("mu, Fzf and Fz must be positive")
    if n_edges < 4:
        raise ValueError("n_edges must be at least 4")
    verts = ellipse_vertices(mu, Fzf, Fz, n_edges)
    H, h = _halfspaces_from_ccw(verts)
    return InputPolytope(H, h, float(mu), verts)


def _clip(poly: np.ndarray, a: np.ndarray, b: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex CCW polygon by ``a . u <= b``."""
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        fp, fq = a @ p - b, a @ q - b
        if fp <= 0:
            out.append(p)
        if fp * fq < 0:
            out.append(p + (q - p) * (fp / (fp - fq)))
    return np.array(out).reshape(-1, 2)


def build_input_constraints(mu: float, params: VehicleParams, limits: ActuatorLimits | None = None,
                            n_edges: int = 16) -> InputPolytope:
    """Halfspace form of ``U1(mu) & U2`` with redundant rows removed."""
    limits = ActuatorLimits.default(params) if limits is None else limits
    ell = inscribe_ellipse_polytope(mu, params.Fzf, params.Fz, n_edges)
    Hb, hb = limits.box_halfspaces()
    H = np.vstack([ell.H, Hb])
    h = np.concatenate([ell.h, hb])

    verts = ell.vertices
    for a, b in zip(Hb, hb):
        verts = _clip(verts, a, b)
    if len(verts) < 3:
        raise EmptyPolytopeError("input constraint polytope is empty")
    # drop duplicate vertices produced by clipping exactly through a vertex
    keep = np.linalg.norm(verts - np.roll(verts, 1, axis=0), axis=1) > 1e-9 * np.max(np.abs(verts))
    verts = verts[keep]

    # a halfspace is irredundant iff it supports an edge of the intersection
    scale = np.max(np.abs(verts))
    tight = np.abs(verts @ H.T - h) <= 1e-9 * np.maximum(1.0, np.abs(h))
    support = tight.sum(axis=0) >= 2
    # collinear duplicates (same normal): keep the first
    rows, seen = [], []
    for i in np.flatnonzero(support):
        if any(np.allclose(H[i], H[j], rtol=1e-9, atol=1e-15 / scale) for j in seen):
            continue
        seen.append(i)
        rows.append(i)
    return InputPolytope(H[rows], h[rows], float(mu), verts)
