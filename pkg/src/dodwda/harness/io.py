"""CSV serialisation of run traces.

Column order is fixed: ``t, s_t``, then per agent ``nu_i, a_i, f_i,
dual_gap_i`` (1-based), then ``nu_star, f_star, ybar_norm, cum_regret,
avg_abs_regret, bound_avg``.  Floats carry 17 significant digits so a reload
is bit-exact.  Round 0 has no accumulated regret; its running averages are
written as 0.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .scenario import RunTrace

AGENT_FIELDS = ("nu", "a", "f", "dual_gap")
TAIL_FIELDS = ("nu_star", "f_star", "ybar_norm", "cum_regret", "avg_abs_regret", "bound_avg")


def csv_columns(n: int) -> list[str]:
    cols = ["t", "s_t"]
    for i in range(1, n + 1):
        cols.extend(f"{name}_{i}" for name in AGENT_FIELDS)
    cols.extend(TAIL_FIELDS)
    return cols


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trace_rows(trace: RunTrace):
    per_agent = [trace.nu, trace.a, trace.f, trace.dual_gap]
    tail = [getattr(trace, name) for name in TAIL_FIELDS]
    for t in range(trace.T + 1):
        row = [str(int(trace.t[t])), _fmt(trace.s[t])]
        for i in range(trace.n):
            row.extend(_fmt(arr[t, i]) for arr in per_agent)
        row.extend(_fmt(arr[t]) for arr in tail)
        yield row


def write_csv(trace: RunTrace, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_columns(trace.n))
        writer.writerows(trace_rows(trace))
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    """Columns of a trace CSV keyed by header name."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    out = {name: data[:, k] for k, name in enumerate(header)}
    out["t"] = out["t"].astype(int)
    return out
