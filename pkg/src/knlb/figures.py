"""Figure rendering for experiment reports.

Each run's summary gets one PNG next to the CSV/JSON outputs.  The CSV
remains the data contract; figures are a reading aid and are rendered with
a non-interactive backend so headless runs never block.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_figures(summary: dict, out_dir) -> list:
    """Render the figure(s) for one summary; returns the written paths."""
    out_dir = Path(out_dir)
    kind = summary["kind"]
    plt = _pyplot()
    path = out_dir / f"{kind}.png"
    fig, ax = plt.subplots(figsize=(6.0, 4.0))

    if kind in ("gegenbauer-scaling", "hermite-scaling", "approx-decay"):
        points = [p for p in summary["points"] if not math.isnan(p.get("mean", math.nan))]
        ds = np.array([p["d"] for p in points], dtype=float)
        means = np.array([p["mean"] for p in points])
        errs = np.array([p.get("stderr", 0.0) for p in points])
        ax.errorbar(ds, means, yerr=errs, fmt="o", capsize=3, label="mean norm")
        fit = summary.get("slope_fit")
        if fit and len(ds):
            grid = np.geomspace(ds.min(), ds.max(), 50)
            ax.plot(
                grid,
                np.exp(fit["intercept"]) * grid ** fit["slope"],
                "--",
                label=f"slope {fit['slope']:.3f}",
            )
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("d")
        ax.set_ylabel(summary["config"]["kind"].replace("-", " "))
        ax.legend()

    elif kind == "decoupling":
        results = [r for r in summary.get("results", []) if r]
        labels = [f"n={p['n']},d={p['d']}" for p in summary["points"][: len(results)]]
        ratios = [r["ratio"] for r in results]
        errs = [3.0 * r["se_ratio"] for r in results]
        xs = np.arange(len(ratios))
        ax.errorbar(xs, ratios, yerr=errs, fmt="s", capsize=4)
        ax.axhline(8.0, color="gray", linestyle=":", label="8")
        ax.axhline(1.0 / 8.0, color="gray", linestyle="--", label="1/8")
        ax.set_xticks(xs, labels, rotation=20)
        ax.set_yscale("log")
        ax.set_ylabel("coupled / decoupled norm")
        ax.legend()

    elif kind == "bound-terms":
        reports = summary.get("reports", [])
        names = ["term_diag", "term_mean", "term_corr", "term_max"]
        width = 0.8 / max(len(reports), 1)
        for i, rep in enumerate(reports):
            xs = np.arange(len(names) + 2) + i * width
            vals = [rep[n] for n in names] + [
                rep["observed_full_norm"],
                rep["observed_offdiag_norm"],
            ]
            ax.bar(xs, vals, width=width, label=f"n={rep['n']},d={rep['d']}")
        ax.set_xticks(
            np.arange(len(names) + 2) + 0.4,
            names + ["||K||", "||offdiag K||"],
            rotation=20,
        )
        ax.set_yscale("log")
        ax.set_ylabel("term value")
        ax.legend(fontsize=8)

    elif kind == "krr-bias":
        points = summary["points"]
        labels = [f"n={p['n']},d={p['d']}" for p in points]
        xs = np.arange(len(points))
        ax.bar(xs - 0.2, [p["mean"] for p in points], width=0.2, label="bias")
        ax.bar(xs, [p.get("target_norm_sq", 0.0) for p in points], width=0.2, label="norm^2")
        ax.bar(xs + 0.2, [p.get("tail", 0.0) for p in points], width=0.2, label="tail")
        ax.set_xticks(xs, labels, rotation=20)
        ax.set_ylabel("squared error")
        ax.legend()

    else:
        plt.close(fig)
        return []

    ax.set_title(kind)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return [path]
