"""Standalone SVG plots for the analysis tables (Agg backend, no display)."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp so identical data gives identical bytes
matplotlib.rcParams["svg.hashsalt"] = "tsasim"
matplotlib.rcParams["svg.fonttype"] = "none"


def _render(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def _empty(ax, message="no applicable runs"):
    ax.text(0.5, 0.5, message, ha="center", va="center", transform=ax.transAxes)


def stats_svg(stats) -> str:
    """Moving box-whisker view: median line, IQR and 5-95 bands, min/max dotted."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if stats is None or len(stats.theta) == 0:
        _empty(ax)
    else:
        x = stats.theta
        ax.fill_between(x, stats.q05, stats.q95, color="tab:blue", alpha=0.15, lw=0, label="5-95%")
        ax.fill_between(x, stats.q25, stats.q75, color="tab:blue", alpha=0.35, lw=0, label="25-75%")
        ax.plot(x, stats.median, color="tab:blue", lw=1.2, label="median")
        ax.plot(x, stats.minimum, color="0.3", lw=0.6, ls=":", label="min/max")
        ax.plot(x, stats.maximum, color="0.3", lw=0.6, ls=":")
        ax.legend(loc="upper left", fontsize=8)
    ax.set_xlabel("motor angle (rot)")
    ax.set_ylabel("fingertip angle (deg)")
    return _render(fig)


def delta_svg(rows, quantiles) -> str:
    """Grouped bars of delta_q per group (pooled first)."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if not rows:
        _empty(ax)
    else:
        groups = [r[0] for r in rows]
        width = 0.8 / len(quantiles)
        x = np.arange(len(groups))
        for k, q in enumerate(quantiles):
            ax.bar(x + (k - (len(quantiles) - 1) / 2) * width, [r[2 + k] for r in rows], width,
                   label=f"q={q:g}")
        ax.set_xticks(x)
        ax.set_xticklabels(groups, rotation=45, ha="right", fontsize=7)
        ax.legend(fontsize=8)
    ax.set_ylabel("delta_q (deg)")
    fig.tight_layout()
    return _render(fig)


def jacobian_svg(series) -> str:
    """Retained Jacobian samples against motor angle, one colour per run."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if not series:
        _empty(ax)
    for label, js in series:
        ax.plot(js.theta, js.jacobian, ".", ms=2, label=label)
    if 0 < len(series) <= 8:
        ax.legend(fontsize=7, markerscale=4)
    ax.set_xlabel("motor angle (rot)")
    ax.set_ylabel("Jacobian (deg/rot)")
    return _render(fig)


def stiffness_svg(rows) -> str:
    """Stiffness against pretwist, one line per run kind."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if not rows:
        _empty(ax)
    kinds = sorted({r["kind"] for r in rows})
    for kind in kinds:
        pts = sorted((r["pretwist_rot"], r["stiffness"]) for r in rows if r["kind"] == kind)
        ax.plot([p for p, _ in pts], [k for _, k in pts], "o-", label=kind)
    if kinds:
        ax.legend(fontsize=8)
    ax.set_xlabel("pretwist (rot)")
    ax.set_ylabel("stiffness (N/deg)")
    return _render(fig)
