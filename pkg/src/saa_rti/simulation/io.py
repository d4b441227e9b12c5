"""CSV traces and aggregate tables."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

TRACE_COLUMNS = (
    "t", "s", "d", "dpsi", "psidot", "vx", "vy", "Fyf_cmd", "Fx_cmd", "Fyf_real", "Fxf_real", "Fyr_real",
    "mu_est", "mu_act", "sigma_s", "sigma_d", "sigma_vx", "qp_iters", "cycle_time_ms", "J_step",
)
AGGREGATE_COLUMNS = ("strategy", "condition", "n", "J_cl_mean", "P_acc", "J_cl_ci", "P_acc_ci")


class SchemaError(ValueError):
    """A CSV file does not have the expected columns."""


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, ".12g")


def write_rows(path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_trace(path, rows) -> None:
    write_rows(path, TRACE_COLUMNS, rows)


def read_trace(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise SchemaError(f"{path}: unexpected trace header")
        data = [[float(c) if c != "" else np.nan for c in row] for row in reader]
    arr = np.array(data, dtype=float).reshape(-1, len(TRACE_COLUMNS))
    return {name: arr[:, i] for i, name in enumerate(TRACE_COLUMNS)}


def write_aggregate(path, aggregates) -> None:
    write_rows(path, AGGREGATE_COLUMNS,
               [(a.strategy, a.condition, a.n, a.J_mean, a.P_acc, a.J_ci, a.P_ci) for a in aggregates])
