"""Matplotlib rendering of arcs: phase portraits, time series, adaptation.

All figures go straight to files (Agg backend, no display) and strip
the date metadata so identical runs produce identical SVG bytes.
Segments are drawn as separate polylines with NaN gaps so the kick
discontinuities show as breaks instead of spurious chords.
"""

from __future__ import annotations

import math

import matplotlib
matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "pulsepend"
import matplotlib.pyplot as plt
import numpy as np

from .hybrid_core import HybridArc

_GOLDEN = (1 + math.sqrt(5)) / 2
_FIG_W = 6.4


def _with_gaps(arc: HybridArc, columns) -> np.ndarray:
    """Stack segment samples with NaN rows between segments."""
    parts = []
    gap = np.full((1, len(columns)), np.nan)
    for k, seg in enumerate(arc.segments):
        if k > 0:
            parts.append(gap)
        parts.append(seg.states[:, columns])
    return np.vstack(parts)


def _times_with_gaps(arc: HybridArc) -> np.ndarray:
    parts = []
    for k, seg in enumerate(arc.segments):
        if k > 0:
            parts.append([np.nan])
        parts.append(seg.times)
    return np.concatenate(parts)


def _save(fig, path) -> None:
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def plot_phase_portrait(arc: HybridArc, path, cycle=None) -> None:
    """(q1, q2) trajectory, with the limit cycle overlaid when given."""
    fig, ax = plt.subplots(figsize=(_FIG_W, _FIG_W / _GOLDEN))
    xy = _with_gaps(arc, (0, 1))
    ax.plot(xy[:, 0], xy[:, 1], lw=0.9, color="tab:blue", label="trajectory")
    if cycle is not None:
        pts = cycle.orbit_samples
        closed = np.vstack([pts[:, 1:3], pts[:1, 1:3]])
        ax.plot(closed[:, 0], closed[:, 1], lw=1.6, color="tab:red",
                label="limit cycle")
    x0 = arc.initial_state()
    ax.plot([x0[0]], [x0[1]], marker="o", ms=5, color="k", label="start")
    ax.set_xlabel("q1 (angle)")
    ax.set_ylabel("q2 (angular velocity)")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_time_series(arc: HybridArc, path) -> None:
    """Stacked time series of every state component, kicks marked."""
    names = arc.state_names
    n = len(names)
    fig, axes = plt.subplots(n, 1, sharex=True, figsize=(_FIG_W, 1.7 * n))
    ts = _times_with_gaps(arc)
    data = _with_gaps(arc, tuple(range(n)))
    for k, (ax, name) in enumerate(zip(np.atleast_1d(axes), names)):
        ax.plot(ts, data[:, k], lw=0.9, color="tab:blue")
        for rec in arc.jumps:
            ax.axvline(rec.time, color="0.8", lw=0.5, zorder=0)
        ax.set_ylabel(name)
        ax.grid(True, alpha=0.3)
    np.atleast_1d(axes)[-1].set_xlabel("t")
    fig.tight_layout()
    _save(fig, path)


def plot_adaptation(arc: HybridArc, path, q1_star: float, band: float | None = None,
                    baseline: HybridArc | None = None) -> None:
    """Peak amplitude and pulse amplitude against time for adaptive runs.

    baseline, when given, is a constant-I run from the same start; its
    angle curve is drawn underneath for contrast.
    """
    from .adaptation import amplitude_trace

    trace = amplitude_trace(arc)
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(_FIG_W, 2 * _FIG_W / _GOLDEN))

    ts = _times_with_gaps(arc)
    data = _with_gaps(arc, (0, 4))
    if baseline is not None:
        bts = _times_with_gaps(baseline)
        bq1 = _with_gaps(baseline, (0,))
        ax1.plot(bts, bq1[:, 0], lw=0.7, color="0.8", label="q1(t), constant I")
    ax1.plot(ts, data[:, 0], lw=0.7, color="0.6", label="q1(t)")
    if trace.size:
        ax1.plot(trace[:, 0], trace[:, 1], "o-", ms=3, lw=1.0, color="tab:blue",
                 label="peak amplitude")
    ax1.axhline(q1_star, color="tab:red", lw=1.0, label="target")
    if band is not None:
        ax1.axhspan(q1_star - band, q1_star + band, color="tab:red", alpha=0.12)
    ax1.set_ylabel("amplitude")
    ax1.legend(loc="best", fontsize=8)
    ax1.grid(True, alpha=0.3)

    ax2.plot(ts, data[:, 1], lw=1.0, color="tab:green")
    ax2.set_ylabel("I (pulse amplitude)")
    ax2.set_xlabel("t")
    ax2.grid(True, alpha=0.3)

    fig.tight_layout()
    _save(fig, path)
