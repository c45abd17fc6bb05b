"""Figure rendering for error traces.

Error axes use a log scale by default (errors span several decades);
exact zeros cannot appear on it, so matplotlib drops them from log plots
and an all-zero series falls back to a flat linear line.  Input files are
never modified; rendering the same inputs twice gives the same figure
dimensions and series counts.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from tgapod_plots.traces import TraceFile

FIGSIZE = (8.0, 4.5)


def _error_scale(values) -> str:
    return "linear" if (values <= 0).all() else "log"


def plot_indicator_vs_error(trace: TraceFile, out_path: str) -> dict:
    """Error (left axis) and indicator (right axis) over time, with one
    black dot per marked instant.

    Returns rendering metadata: the number of marker glyphs drawn, the
    series count and the figure size (used by callers to report what the
    figure contains, and by re-run checks).
    """
    fig, ax_err = plt.subplots(figsize=FIGSIZE)
    ax_ind = ax_err.twinx()

    ax_err.plot(trace.times, trace.errors, color="tab:red", label="error")
    ax_err.set_yscale(_error_scale(trace.errors))
    ax_err.set_xlabel("time")
    ax_err.set_ylabel("relative error")

    ax_ind.plot(trace.times, trace.indicators, color="tab:blue", label="indicator")
    ax_ind.set_yscale(_error_scale(trace.indicators))
    ax_ind.set_ylabel("indicator")

    mask = trace.marked == 1
    n_markers = int(mask.sum())
    if n_markers:
        ax_ind.plot(trace.times[mask], trace.indicators[mask], "o", color="black", zorder=5)

    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return {"markers": n_markers, "series": 2 + (1 if n_markers else 0), "figsize": FIGSIZE}


def plot_method_comparison(traces: list[TraceFile], labels: list[str], out_path: str) -> dict:
    """One error curve per method on a shared time axis."""
    if len(traces) != len(labels):
        raise ValueError(f"{len(traces)} traces but {len(labels)} labels")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for trace, label in zip(traces, labels):
        ax.plot(trace.times, trace.errors, label=label)
    scale = "linear" if all((t.errors <= 0).all() for t in traces) else "log"
    ax.set_yscale(scale)
    ax.set_xlabel("time")
    ax.set_ylabel("relative error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return {"series": len(traces), "figsize": FIGSIZE}
