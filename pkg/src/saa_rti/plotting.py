"""SVG figures rendered from trace CSVs (never from live simulation state)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .frenet import Centerline, frenet_to_cartesian, road_edges  # noqa: E402
from .simulation.io import read_trace  # noqa: E402
from .vehicle_model import VehicleParams  # noqa: E402

# stable ids and no timestamp, so identical traces give identical files
matplotlib.rcParams["svg.hashsalt"] = "saa-rti"
_SVG_META = {"Date": None}


def _cartesian(trace, centerline: Centerline) -> np.ndarray:
    pts = []
    for s, d, dpsi in zip(trace["s"], trace["d"], trace["dpsi"]):
        x = np.array([s, d, dpsi, 0.0, 0.0, 0.0])
        p = frenet_to_cartesian(x, centerline)
        pts.append((p.x, p.y))
    return np.array(pts).reshape(-1, 2)


def _draw_road(ax, centerline: Centerline, s_max: float):
    mid, left, right = road_edges(centerline)
    keep = np.linspace(centerline.s[0], centerline.s[-1], len(mid)) <= s_max
    ax.plot(*mid[keep].T, color="0.6", lw=0.8, ls="--")
    for edge in (left, right):
        ax.plot(*edge[keep].T, color="k", lw=1.0)


def _draw_obstacles(ax, obstacles, centerline: Centerline):
    for ob in obstacles:
        p = frenet_to_cartesian(np.array([ob.s, ob.d, 0, 0, 0, 0.0]), centerline)
        ax.add_patch(plt.Circle((p.x, p.y), ob.r, color="tab:red", alpha=0.8))


def _s_extent(traces, obstacles) -> float:
    s_end = max(float(np.nanmax(t["s"])) for t in traces)
    s_obs = max((ob.s + ob.r for ob in obstacles), default=0.0)
    return max(s_end, s_obs) + 10.0


def plot_run(trace_path, centerline: Centerline, obstacles, params: VehicleParams, out_dir) -> list[Path]:
    """Trajectory overlay and front-force scatter with actual (solid) and assumed (dashed) friction circles."""
    tr = read_trace(trace_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(trace_path).stem

    fig, ax = plt.subplots(figsize=(8, 4))
    _draw_road(ax, centerline, _s_extent([tr], obstacles))
    _draw_obstacles(ax, obstacles, centerline)
    xy = _cartesian(tr, centerline)
    ax.plot(*xy.T, color="tab:blue", lw=1.5, label="vehicle")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(loc="best")
    traj = out_dir / f"{stem}_trajectory.svg"
    fig.savefig(traj, format="svg", metadata=_SVG_META)
    plt.close(fig)

    share = params.Fzf / params.Fz
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(tr["Fyf_cmd"] / 1e3, share * tr["Fx_cmd"] / 1e3, marker="x", color="tab:blue", s=14, label="commanded")
    ax.scatter(tr["Fyf_real"] / 1e3, tr["Fxf_real"] / 1e3, facecolors="none", edgecolors="m", s=14, label="realized")
    th = np.linspace(0.0, 2.0 * np.pi, 200)
    for mu, ls in ((np.nanmax(tr["mu_act"]), "-"), (np.nanmax(tr["mu_est"]), "--")):
        r = mu * params.Fzf / 1e3
        ax.plot(r * np.cos(th), r * np.sin(th), color="k", ls=ls)
    ax.set_aspect("equal")
    ax.set_xlabel("front lateral force [kN]")
    ax.set_ylabel("front longitudinal force [kN]")
    ax.legend(loc="upper right")
    forces = out_dir / f"{stem}_forces.svg"
    fig.savefig(forces, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return [traj, forces]


def plot_compare(trace_a, trace_b, centerline: Centerline, obstacles, out_path, labels=("a", "b")) -> Path:
    """Both trajectories on one road, plus speed over arc length."""
    ta, tb = read_trace(trace_a), read_trace(trace_b)
    fig, (ax, ax_v) = plt.subplots(2, 1, figsize=(8, 6))
    _draw_road(ax, centerline, _s_extent([ta, tb], obstacles))
    _draw_obstacles(ax, obstacles, centerline)
    for tr, label, color in ((ta, labels[0], "tab:blue"), (tb, labels[1], "tab:orange")):
        ax.plot(*_cartesian(tr, centerline).T, color=color, label=label)
        ax_v.plot(tr["s"], tr["vx"], color=color, label=label)
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best")
    ax_v.set_xlabel("s [m]")
    ax_v.set_ylabel("vx [m/s]")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return out_path
