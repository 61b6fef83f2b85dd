"""Matplotlib figure rendering for CLI reports.

Every report path renders a figure next to its delimited output; figures
are illustrative, the CSV/JSON files stay the canonical results.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def sweep_contour(result, path, title="Eventual control probability"):
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    x = np.asarray(result.axis2_values)
    y = np.asarray(result.axis1_values)
    cs = ax.contourf(x, y, result.values, levels=12, cmap="viridis")
    fig.colorbar(cs, ax=ax)
    ax.set_xlabel(result.axis2_name)
    ax.set_ylabel(result.axis1_name)
    ax.set_title(title)
    return _save(fig, path)


def compare_plot(rows, path):
    """rows: (r, analytic, sim_median, sim_q1, sim_q3) tuples."""
    r = [row[0] for row in rows]
    analytic = [row[1] for row in rows]
    med = [row[2] for row in rows]
    q1 = [row[3] for row in rows]
    q3 = [row[4] for row in rows]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    yerr = [np.maximum(0, np.subtract(med, q1)), np.maximum(0, np.subtract(q3, med))]
    ax.errorbar(r, med, yerr=yerr, fmt="s", capsize=4, label="simulation (median, IQR)")
    ax.plot(r, analytic, "o--", label="analytic model")
    ax.set_xlabel("compromise ratio r (g = e = r)")
    ax.set_ylabel("eventually-controlled fraction")
    ax.legend()
    ax.set_title("Analytic model vs trace-replay simulation")
    return _save(fig, path)


def failure_rate_plot(rates, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(rates)), rates, lw=1.2)
    ax.set_xlabel("trial")
    ax.set_ylabel("median circuit failure rate")
    ax.set_ylim(0, 1)
    ax.set_title("Natural circuit failure rate per trial")
    return _save(fig, path)


def detection_rates_plot(summary, path):
    metrics = ("fp_suspect", "fn_suspect", "fp_guilty", "fn_guilty")
    fig, ax = plt.subplots(figsize=(6, 4))
    labels, meds, lo, hi = [], [], [], []
    for m in metrics:
        q1, med, q3 = summary.quartiles(m)
        if np.isnan(med):
            continue
        labels.append(m)
        meds.append(med)
        lo.append(max(0.0, med - q1))
        hi.append(max(0.0, q3 - med))
    xs = np.arange(len(labels))
    ax.bar(xs, meds, yerr=[lo, hi], capsize=4, color="tab:blue", alpha=0.8)
    ax.set_xticks(xs, labels, rotation=20)
    ax.set_ylabel("rate (median, IQR)")
    ax.set_title("Detection error rates")
    return _save(fig, path)


def bandwidth_plot(table, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    bw = np.sort(table.bandwidth)
    ax.hist(np.log10(bw), bins=50, color="tab:gray")
    ax.set_xlabel("log10 bandwidth (B/s)")
    ax.set_ylabel("relays")
    ax.set_title("Relay bandwidth distribution")
    return _save(fig, path)


def trace_summary_plot(traces, path):
    present = (traces.statuses != -1).mean(axis=0)
    up = (traces.statuses == 1).mean(axis=0)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(present, label="in consensus")
    ax.plot(up, label="probe succeeded")
    ax.set_xlabel("trial")
    ax.set_ylabel("fraction of relays")
    ax.set_ylim(0, 1)
    ax.legend()
    ax.set_title("Lifecycle trace summary")
    return _save(fig, path)
