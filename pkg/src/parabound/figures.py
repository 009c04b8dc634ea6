"""Figure rendering for experiment reports.

Figures are written straight to files next to the delimited output; no
interactive backend is touched (matplotlib's object API only).
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import List

from matplotlib.figure import Figure

COLUMN_STYLES = [
    ("eta_init", "o-"),
    ("eta_F", "s-"),
    ("eta_ell_MK", "^-"),
    ("eta_dpsi", "v-"),
    ("eta_zh", "d-"),
]


def _good_rows(records):
    return [r for r in records if not r.error and r.e_M == r.e_M]


def convergence_figure(records: List, path) -> Path:
    """Log-log error and bound against M with a second-order guide line."""
    rows = _good_rows(records)
    fig = Figure(figsize=(6.0, 4.2))
    ax = fig.add_subplot(1, 1, 1)
    ms = [r.M for r in rows]
    errors = [r.e_M for r in rows]
    bounds = [r.eta_total for r in rows]
    ax.loglog(ms, errors, "o-", label="error at T")
    ax.loglog(ms, bounds, "s-", label="guaranteed bound")
    if rows and errors[0] > 0.0:
        guide = [errors[0] * (ms[0] / m) ** 2 for m in ms]
        ax.loglog(ms, guide, "k--", linewidth=0.8, label="order 2")
    ax.set_xlabel("time steps M (h = tau)")
    ax.set_ylabel("maximum norm at final time")
    ax.grid(True, which="both", linewidth=0.4, alpha=0.5)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    return path


def breakdown_figure(records: List, path) -> Path:
    """Component columns of the bound against M."""
    rows = [r for r in _good_rows(records) if r.columns]
    fig = Figure(figsize=(6.0, 4.2))
    ax = fig.add_subplot(1, 1, 1)
    ms = [r.M for r in rows]
    for name, style in COLUMN_STYLES:
        values = [r.columns[name] for r in rows]
        if any(v > 0.0 and math.isfinite(v) for v in values):
            ax.loglog(ms, values, style, label=name, markersize=4)
    ax.set_xlabel("time steps M (h = tau)")
    ax.set_ylabel("weighted component value")
    ax.grid(True, which="both", linewidth=0.4, alpha=0.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    return path


def render_report_figures(records: List, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return {
        "convergence_figure": convergence_figure(records, out / "convergence.png"),
        "breakdown_figure": breakdown_figure(records, out / "breakdown.png"),
    }
