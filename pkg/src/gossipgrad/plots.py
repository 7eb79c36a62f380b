"""Figure rendering for run traces and sweep tables.

Figures are rendered to files with the Agg backend, next to the delimited
outputs they visualize.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .engine import MetricsTrace


def plot_consensus(traces: list[tuple[str, MetricsTrace]], out_path) -> str:
    """Consensus distance d^k versus effective updates, log-scale y."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, trace in traces:
        ks = [r.k for r in trace.records]
        ds = [max(r.d_k, 1e-300) for r in trace.records]
        ax.semilogy(ks, ds, label=label)
    ax.set_xlabel("effective updates")
    ax.set_ylabel("distance to consensus $d^k$")
    ax.grid(True, which="both", alpha=0.3)
    if len(traces) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return str(out_path)


def plot_prediction_error(traces: list[tuple[str, MetricsTrace]], out_path) -> str | None:
    """Prediction error at the node-average point versus effective updates."""
    fig, ax = plt.subplots(figsize=(6, 4))
    plotted = False
    for label, trace in traces:
        pts = [(r.k, r.pred_error) for r in trace.records if r.pred_error is not None]
        if not pts:
            continue
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label=label)
        plotted = True
    if not plotted:
        plt.close(fig)
        return None
    ax.set_xlabel("effective updates")
    ax.set_ylabel("prediction error")
    ax.set_ylim(0, 1)
    ax.grid(True, alpha=0.3)
    if len(traces) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return str(out_path)


def plot_objective(traces: list[tuple[str, MetricsTrace]], out_path) -> str | None:
    fig, ax = plt.subplots(figsize=(6, 4))
    plotted = False
    for label, trace in traces:
        pts = [(r.k, r.objective) for r in trace.records if r.objective is not None]
        if not pts:
            continue
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label=label)
        plotted = True
    if not plotted:
        plt.close(fig)
        return None
    ax.set_xlabel("effective updates")
    ax.set_ylabel("objective at node average")
    ax.grid(True, alpha=0.3)
    if len(traces) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return str(out_path)


def render_report(traces: list[tuple[str, MetricsTrace]], out_dir) -> list[str]:
    """Render every applicable figure for the given traces; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    written.append(plot_consensus(traces, os.path.join(out_dir, "consensus.png")))
    p = plot_prediction_error(traces, os.path.join(out_dir, "pred_error.png"))
    if p:
        written.append(p)
    p = plot_objective(traces, os.path.join(out_dir, "objective.png"))
    if p:
        written.append(p)
    return written
