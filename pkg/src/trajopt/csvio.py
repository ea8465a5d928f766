"""CSV artifacts: trajectories, iteration logs, comparison tables, sweeps.

All writers are atomic (temp file + rename) and format floats with repr so
that emitted files are bitwise deterministic and round-trip exactly.
"""
from __future__ import annotations

import csv
import math
import os
import tempfile

import numpy as np

from .dynamics import Trajectory
from .optimizer import IterationRecord, SweepRow


def _atomic_open(path):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    return tempfile.NamedTemporaryFile("w", dir=d, delete=False,
                                       newline="", suffix=".tmp")


def _commit(tmp, path):
    tmp.flush()
    os.fsync(tmp.fileno())
    tmp.close()
    os.replace(tmp.name, path)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and math.isnan(v):
        return ""
    return repr(float(v))


def _parse(s: str) -> float:
    return math.nan if s == "" else float(s)


def write_trajectory(path, traj: Trajectory):
    """Header t,x1..xn,u1..um; the terminal row has empty input fields."""
    n, m, T = traj.n, traj.m, traj.horizon
    tmp = _atomic_open(path)
    w = csv.writer(tmp)
    w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(m)])
    for t in range(T):
        w.writerow([t] + [_fmt(v) for v in traj.x[t]] + [_fmt(v) for v in traj.u[t]])
    w.writerow([T] + [_fmt(v) for v in traj.x[T]] + [""] * m)
    _commit(tmp, path)


def read_trajectory(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    n = sum(1 for h in header if h.startswith("x"))
    m = sum(1 for h in header if h.startswith("u"))
    body = rows[1:]
    T = len(body) - 1
    x = np.zeros((T + 1, n))
    u = np.zeros((T, m))
    for row in body:
        t = int(row[0])
        x[t] = [float(v) for v in row[1:1 + n]]
        if t < T:
            u[t] = [float(v) for v in row[1 + n:1 + n + m]]
    return Trajectory(x, u, x[0])


ITERATION_FIELDS = ["k", "cost", "dg", "descent_norm", "kappa_max", "dist"]


def write_iterations(path, records: list[IterationRecord]):
    tmp = _atomic_open(path)
    w = csv.writer(tmp)
    w.writerow(ITERATION_FIELDS)
    for r in records:
        w.writerow([r.k, _fmt(r.cost), _fmt(r.dg), _fmt(r.descent_norm),
                    _fmt(r.kappa_max), _fmt(r.dist)])
    _commit(tmp, path)


def read_iterations(path) -> list[IterationRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [IterationRecord(k=int(r["k"]), cost=_parse(r["cost"]),
                            dg=_parse(r["dg"]),
                            descent_norm=_parse(r["descent_norm"]),
                            kappa_max=_parse(r["kappa_max"]),
                            dist=_parse(r["dist"]))
            for r in rows]


def write_compare(path, records_mb, records_dd):
    """Joint |dg|-vs-iteration table; shorter runs leave trailing fields empty."""
    tmp = _atomic_open(path)
    w = csv.writer(tmp)
    w.writerow(["k", "abs_dg_model_based", "abs_dg_data_driven"])
    for k in range(max(len(records_mb), len(records_dd))):
        mb = _fmt(abs(records_mb[k].dg)) if k < len(records_mb) else ""
        dd = _fmt(abs(records_dd[k].dg)) if k < len(records_dd) else ""
        w.writerow([k, mb, dd])
    _commit(tmp, path)


def write_sweep(path, rows: list[SweepRow]):
    tmp = _atomic_open(path)
    w = csv.writer(tmp)
    w.writerow(["j", "delta_x", "delta_u", "dist", "error"])
    for r in rows:
        w.writerow([r.j, _fmt(r.delta_x), _fmt(r.delta_u),
                    _fmt(r.dist), r.error or ""])
    _commit(tmp, path)


def write_batches(path, k, batches):
    """Long-format dump of one iteration's data batches (flag-gated artifact)."""
    tmp = _atomic_open(path)
    w = csv.writer(tmp)
    w.writerow(["k", "t", "matrix", "row", "col", "value"])
    for t in range(batches.horizon):
        for name, M in (("dX", batches.dX[t]), ("dU", batches.dU[t]),
                        ("dXp", batches.dXp[t])):
            for (i, j), v in np.ndenumerate(M):
                w.writerow([k, t, name, i, j, _fmt(v)])
        w.writerow([k, t, "kappa", 0, 0, _fmt(batches.kappas[t])])
    _commit(tmp, path)


def write_text(path, text):
    tmp = _atomic_open(path)
    tmp.write(text)
    _commit(tmp, path)
