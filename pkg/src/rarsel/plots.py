"""Figure rendering for recovery tables and real-data reports."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_recovery_figure(table, path) -> Path:
    """Recovery proportion against sample size, one line per method."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    xs = [n for n, _ in table.columns]
    for method in table.methods:
        ys = []
        for n, _ in table.columns:
            cell = table.cells[(method, n)]
            ys.append(cell.proportion if cell.attempts else math.nan)
        ax.plot(xs, ys, marker="o", markersize=4, linewidth=1.4, label=method)
    ax.set_xlabel("sample size n")
    ax.set_ylabel("exact sign recovery proportion")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"Scenario {table.scenario} ({table.replications} replications)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8, loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_realdata_figure(report, path) -> Path:
    """Two panels: CV-tuned test error (with spread) and fitted model size."""
    path = Path(path)
    fig, (ax_err, ax_size) = plt.subplots(1, 2, figsize=(9.6, 4.0))
    labels = list(report.methods)
    xs = range(len(labels))

    errs = [report.stats[m].test_mse_mean for m in labels]
    sds = [report.stats[m].test_mse_sd or 0.0 for m in labels]
    ax_err.bar(xs, errs, yerr=sds, capsize=3, color="#4878a8")
    ax_err.set_ylabel("test MSE (cv-tuned)")
    ax_err.set_xticks(list(xs))
    ax_err.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)

    sizes = [report.stats[m].model_size_mean for m in labels]
    size_sds = [report.stats[m].model_size_sd or 0.0 for m in labels]
    ax_size.bar(xs, sizes, yerr=size_sds, capsize=3, color="#a85448")
    ax_size.set_ylabel("fitted model size")
    ax_size.set_xticks(list(xs))
    ax_size.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)

    fig.suptitle(f"Train/test evaluation over {report.repetitions} split(s)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
