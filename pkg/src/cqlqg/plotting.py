"""Convergence traces from a synthesis report: CSV table and PNG figure."""

import csv
import os

import numpy as np

TRACE_COLUMNS = ("iteration", "cost", "psi_norm", "dedb_norm", "abscissa", "domination")


def trace_rows(report):
    """Per-iteration rows from a report dict (as written by the CLI)."""
    out = []
    for rec in report["synthesis"]["iterations"]:
        out.append([rec.get(k) for k in TRACE_COLUMNS])
    return out


def write_trace_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace_rows(report):
            w.writerow(["" if v is None else repr(v) for v in r])


def _series(rows, j):
    return np.array([np.nan if r[j] is None else r[j] for r in rows], dtype=float)


def plot_trace(report, path, dpi=120):
    """Four-panel figure: cost, |Psi|, |dE/db| and closed-loop abscissa."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = trace_rows(report)
    it = _series(rows, 0)
    fig, axes = plt.subplots(2, 2, figsize=(8, 6), sharex=True)
    panels = ((1, "cost E", True), (2, r"$\|\Psi\|$", True),
              (3, r"$\|dE/db\|$", True), (4, "spectral abscissa", False))
    for ax, (j, label, log) in zip(axes.flat, panels):
        y = _series(rows, j)
        if log:
            y = np.where(y > 0, y, np.nan)
            ax.semilogy(it, y, ".-", lw=1)
        else:
            ax.plot(it, y, ".-", lw=1)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    classical = report.get("classical")
    if classical and (classical.get("cost") or 0) > 0:
        axes[0, 0].axhline(classical["cost"], color="k", ls="--", lw=0.8, label="classical")
        axes[0, 0].legend(loc="upper right", fontsize=8)
    for ax in axes[1]:
        ax.set_xlabel("outer iteration")
    fig.suptitle(f"status: {report['synthesis']['status']}", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def render_report(report, out_dir, stem="trace"):
    """Write ``<stem>.csv`` and ``<stem>.png`` into ``out_dir``; return both paths."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, stem + ".csv")
    png_path = os.path.join(out_dir, stem + ".png")
    write_trace_csv(report, csv_path)
    plot_trace(report, png_path)
    return csv_path, png_path
