"""Dense primal-dual interior-point solver for ``min 1/2 z'Pz + q'z  s.t.  l <= Az <= u``.

Rows with ``l == u`` are treated as equalities, infinite bounds are dropped.
Duals follow the convention ``Pz + q + A'y = 0`` with ``y > 0`` on active
upper bounds and ``y < 0`` on active lower bounds.  The iteration is
Mehrotra's predictor-corrector on the inequality form ``Gz + s = h``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SOLVED = "solved"
MAX_ITER = "max-iterations"
INFEASIBLE = "primal-infeasible"


@dataclass(frozen=True)
class QpProblem:
    P: np.ndarray
    q: np.ndarray
    A: np.ndarray
    l: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        q = np.asarray(self.q, dtype=float).reshape(-1)
        n = q.size
        A = np.asarray(self.A, dtype=float).reshape(-1, n)
        l = np.asarray(self.l, dtype=float).reshape(-1)
        u = np.asarray(self.u, dtype=float).reshape(-1)
        if P.shape != (n, n):
            raise ValueError(f"P has shape {P.shape}, expected {(n, n)}")
        if not (l.size == u.size == A.shape[0]):
            raise ValueError("A, l and u disagree on the number of rows")
        if not np.allclose(P, P.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(P).max(initial=0.0))):
            raise ValueError("P must be symmetric")
        if np.any(l > u):
            raise ValueError("need l <= u row-wise")
        if n and np.linalg.eigvalsh(P).min() < -1e-8 * max(1.0, np.abs(P).max()):
            raise ValueError("P must be positive semidefinite")
        for name, v in (("P", P), ("q", q), ("A", A), ("l", l), ("u", u)):
            object.__setattr__(self, name, v)

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def m(self) -> int:
        return self.l.size

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.P @ z + self.q @ z)


@dataclass(frozen=True)
class QpSettings:
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    max_iter: int = 4000


@dataclass
class QpSolution:
    z: np.ndarray
    y: np.ndarray
    status: str
    primal_residual: float
    dual_residual: float
    iterations: int
    objective: float = field(default=np.nan)

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


def kkt_residuals(prob: QpProblem, z, y) -> tuple[float, float]:
    """(primal, dual) infinity-norm residuals in the original two-sided form."""
    Az = prob.A @ z
    viol = np.maximum(prob.l - Az, 0.0) + np.maximum(Az - prob.u, 0.0)
    rp = float(np.max(viol, initial=0.0))
    rd = float(np.max(np.abs(prob.P @ z + prob.q + prob.A.T @ y), initial=0.0))
    return rp, rd


def _split(prob: QpProblem):
    l, u = prob.l, prob.u
    fin_l, fin_u = np.isfinite(l), np.isfinite(u)
    eq = fin_l & fin_u & (np.abs(u - l) <= 1e-12 * np.maximum(1.0, np.abs(u)))
    up = np.flatnonzero(fin_u & ~eq)
    lo = np.flatnonzero(fin_l & ~eq)
    eq = np.flatnonzero(eq)
    G = np.vstack([prob.A[up], -prob.A[lo]])
    h = np.concatenate([u[up], -l[lo]])
    return G, h, prob.A[eq], l[eq], up, lo, eq


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def solve(prob: QpProblem, warm=None, settings: QpSettings = QpSettings()) -> QpSolution:
    """Solve the QP; ``warm`` is an optional ``(z, y)`` pair (only ``z`` seeds the iterate)."""
    n = prob.n
    G, h, E, e, up, lo, eq = _split(prob)
    mi, me = len(h), len(e)
    P, q = prob.P, prob.q
    reg = 1e-11 * max(1.0, np.abs(P).max(initial=0.0))

    def kkt_solve(K, rhs_z, rhs_e):
        if me == 0:
            try:
                return np.linalg.solve(K, rhs_z), np.zeros(0)
            except np.linalg.LinAlgError:
                return np.linalg.lstsq(K, rhs_z, rcond=None)[0], np.zeros(0)
        M = np.block([[K, E.T], [E, -reg * np.eye(me)]])
        rhs = np.concatenate([rhs_z, rhs_e])
        try:
            sol = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
        return sol[:n], sol[n:]

    # starting point: regularised least-squares fit, or the warm primal
    if warm is not None and warm[0] is not None:
        z = np.array(warm[0], dtype=float)
        nu = np.zeros(me)
    else:
        K0 = P + G.T @ G + reg * np.eye(n)
        z, nu = kkt_solve(K0, -q + G.T @ h, e)
    s = h - G @ z
    s = np.maximum(s, 1.0) if mi else s
    lam = np.ones(mi)

    scale_d = max(1.0, np.abs(q).max(initial=0.0))
    scale_p = max(1.0, np.abs(h).max(initial=0.0), np.abs(e).max(initial=0.0))
    status = MAX_ITER
    it = 0
    for it in range(1, settings.max_iter + 1):
        rd = P @ z + q + G.T @ lam + E.T @ nu
        rp = G @ z + s - h
        re = E @ z - e
        mu = float(s @ lam / mi) if mi else 0.0

        tol_d = settings.eps_abs + settings.eps_rel * max(scale_d, np.abs(P @ z).max(initial=0.0))
        tol_p = settings.eps_abs + settings.eps_rel * scale_p
        if (np.abs(rd).max(initial=0.0) <= 0.1 * tol_d and np.abs(rp).max(initial=0.0) <= 0.1 * tol_p
                and np.abs(re).max(initial=0.0) <= 0.1 * tol_p and mu <= 1e-3 * settings.eps_abs):
            status = SOLVED
            break

        # infeasibility certificate: G'lam + E'nu ~ 0 with h'lam + e'nu < 0
        norm = np.abs(lam).max(initial=0.0) + np.abs(nu).max(initial=0.0)
        if norm > 1e8:
            lh, nh = lam / norm, nu / norm
            if (np.abs(G.T @ lh + E.T @ nh).max(initial=0.0) <= 1e-6 and h @ lh + e @ nh < -1e-6):
                status = INFEASIBLE
                break

        w = lam / s
        K = P + (G.T * w) @ G + reg * np.eye(n)

        def direction(rc):
            # eliminate ds, dlam and solve the reduced system for dz, dnu
            rhs = -rd - G.T @ ((lam * rp - rc) / s)
            dz, dnu = kkt_solve(K, rhs, -re)
            ds = -rp - G @ dz
            dl = -(rc + lam * ds) / s
            return dz, ds, dl, dnu

        dz, ds, dl, dnu = direction(s * lam)
        a_aff = min(_max_step(s, ds), _max_step(lam, dl))
        if mi:
            mu_aff = float((s + a_aff * ds) @ (lam + a_aff * dl) / mi)
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            dz, ds, dl, dnu = direction(s * lam + ds * dl - sigma * mu)
        alpha = min(1.0, 0.99 * min(_max_step(s, ds), _max_step(lam, dl)))
        z = z + alpha * dz
        s = s + alpha * ds
        lam = lam + alpha * dl
        nu = nu + alpha * dnu
        if mi:
            s = np.maximum(s, 1e-300)
            lam = np.maximum(lam, 1e-300)

    y = np.zeros(prob.m)
    k = len(up)
    np.add.at(y, up, lam[:k])
    np.add.at(y, lo, -lam[k:])
    y[eq] = nu
    r_p, r_d = kkt_residuals(prob, z, y)
    return QpSolution(z, y, status, r_p, r_d, it, prob.objective(z))


@dataclass(frozen=True)
class HorizonStructure:
    """Block layout of a vector: ``n_stages`` blocks of ``stage_size`` followed by ``tail`` entries."""

    n_stages: int
    stage_size: int
    tail: int = 0

    @property
    def size(self) -> int:
        return self.n_stages * self.stage_size + self.tail


def shift_blocks(v, structure: HorizonStructure, steps: int = 1) -> np.ndarray:
    """Drop the first ``steps`` stage blocks and repeat the last block; the tail is kept."""
    v = np.asarray(v, dtype=float)
    if v.size != structure.size:
        raise ValueError(f"vector of size {v.size} does not match structure of size {structure.size}")
    ns, b = structure.n_stages, structure.stage_size
    blocks = v[: ns * b].reshape(ns, b)
    idx = np.minimum(np.arange(ns) + steps, ns - 1)
    return np.concatenate([blocks[idx].reshape(-1), v[ns * b:]])


def warm_start_shift(prev: QpSolution, primal: HorizonStructure, dual: HorizonStructure | None = None):
    """Shift primal (and dual, when its layout is given) one stage forward."""
    z = shift_blocks(prev.z, primal)
    y = shift_blocks(prev.y, dual) if dual is not None else np.array(prev.y, dtype=float)
    return z, y


def dump_problem(prob: QpProblem, path) -> None:
    """Write P, q, A, l, u as labelled dense text blocks."""
    with open(path, "w") as fh:
        for name in ("P", "q", "A", "l", "u"):
            M = np.atleast_2d(getattr(prob, name))
            fh.write(f"# {name} {M.shape[0]} {M.shape[1]}\n")
            np.savetxt(fh, M, fmt="%.17g")


def load_problem(path) -> QpProblem:
    mats = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines):
        _, name, r, c = lines[i].split()
        r, c = int(r), int(c)
        rows = [np.array(lines[i + 1 + j].split(), dtype=float) for j in range(r)]
        mats[name] = np.array(rows).reshape(r, c)
        i += 1 + r
    return QpProblem(mats["P"], mats["q"].ravel(), mats["A"], mats["l"].ravel(), mats["u"].ravel())
