"""Static SVG charts of a run trace."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..errors import ContractViolation  # noqa: E402
from .scenario import RunTrace  # noqa: E402

CHART_FILES = {
    "dual": "fig1a_dual_variables.svg",
    "aggregate": "fig1b_aggregate_tracking.svg",
    "local": "fig1c_local_tracking.svg",
    "regret": "fig2_average_regret.svg",
}


def aggregate_series(trace: RunTrace) -> tuple[np.ndarray, np.ndarray]:
    """Summed dispatch and setpoint, the two lines of the aggregate chart."""
    return trace.a.sum(axis=1), trace.s


def _save(fig, path: Path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_plots(trace: RunTrace, output_dir) -> list[Path]:
    if trace.T < 1 or trace.nu.size == 0:
        raise ContractViolation("cannot plot an empty trace")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = trace.t
    paths = []

    with plt.rc_context({"svg.hashsalt": "dodwda", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for i in range(trace.n):
            ax.plot(t, trace.nu[:, i], lw=0.8, label=f"building {i + 1}")
        ax.plot(t, trace.nu_star, "k--", lw=1.0, label="centralised optimum")
        ax.set_xlabel("round t")
        ax.set_ylabel("dual variable")
        ax.legend(fontsize=7)
        paths.append(out / CHART_FILES["dual"])
        _save(fig, paths[-1])

        total, s = aggregate_series(trace)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(t, s, "k--", lw=1.0, label="setpoint")
        ax.plot(t, total, lw=0.8, label="aggregate adjustment")
        ax.set_xlabel("round t")
        ax.set_ylabel("power (kW)")
        ax.legend(fontsize=7)
        paths.append(out / CHART_FILES["aggregate"])
        _save(fig, paths[-1])

        fig, ax = plt.subplots(figsize=(6, 4))
        for i in range(trace.n):
            line, = ax.plot(t, trace.a[:, i], lw=0.8, label=f"building {i + 1}")
            ax.plot(t, trace.virtual[:, i], ls=":", lw=0.8, color=line.get_color())
        ax.set_xlabel("round t")
        ax.set_ylabel("adjustment (kW); dotted: virtual setpoint")
        ax.legend(fontsize=7)
        paths.append(out / CHART_FILES["local"])
        _save(fig, paths[-1])

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(t[1:], trace.avg_abs_regret[1:], lw=1.0, label="average absolute regret")
        ax.semilogy(t[1:], trace.bound_avg[1:], "k--", lw=1.0, label="average bound")
        ax.set_xlabel("round t")
        ax.legend(fontsize=7)
        paths.append(out / CHART_FILES["regret"])
        _save(fig, paths[-1])
    return paths
