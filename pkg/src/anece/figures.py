"""Figure rendering for sweep tables.

Turns the flat result rows into the standard comparison plots (normalized
MSE / MI / Eve MSE against pilot energy, fairness ratio curves) and writes
them next to the delimited output.  matplotlib is imported lazily so the
numeric core never pays for a plotting backend.
"""

from __future__ import annotations

import math
from pathlib import Path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _series(rows, ycol):
    """Group (KP_dB, y) points per method, grid order preserved."""
    out = {}
    for r in rows:
        y = getattr(r, ycol, None)
        if y is None or (isinstance(y, float) and math.isnan(y)) or r.status != "ok":
            continue
        out.setdefault(r.method, ([], []))
        out[r.method][0].append(r.KP_dB)
        out[r.method][1].append(y)
    return out


def render_sweep_figures(rows, outdir) -> list[Path]:
    """Write one PNG per available metric; returns the created paths."""
    plt = _pyplot()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    panels = [
        ("J_norm", "normalized MSE", "log", "sweep_mse.png"),
        ("I_norm", "normalized MI (bits)", "linear", "sweep_mi.png"),
        ("eve_norm", "normalized MSE at Eve", "linear", "sweep_eve.png"),
    ]
    for ycol, label, yscale, fname in panels:
        series = _series(rows, ycol)
        if not series:
            continue
        fig, ax = plt.subplots(figsize=(6.0, 4.2))
        for method, (xs, ys) in series.items():
            order = sorted(range(len(xs)), key=xs.__getitem__)
            ax.plot([xs[k] for k in order], [ys[k] for k in order],
                    marker="o", markersize=3.5, label=method)
        ax.set_xlabel("KP (dB)")
        ax.set_ylabel(label)
        ax.set_yscale(yscale)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = outdir / fname
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def render_fairness_figure(entries, outdir) -> list[Path]:
    """Plot the four fairness-ratio curves produced by compare_fairness."""
    plt = _pyplot()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cols = ["ratio_mse_sum", "ratio_mse_fair", "ratio_mi_sum", "ratio_mi_fair"]
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    xs = [e["KP_dB"] for e in entries]
    for col in cols:
        ax.plot(xs, [e[col] for e in entries], marker="o", markersize=3.5, label=col)
    ax.set_xlabel("KP (dB)")
    ax.set_ylabel("fairness ratio (max/min)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = outdir / "fairness_ratios.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]
