"""Matplotlib rendering of formation and funnel figures.

All styling is fixed so identical CSV input yields byte-identical images;
SVG output pins the hash salt and drops the date metadata for the same
reason.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .schema import RunTable  # noqa: E402

_AGENT_COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]
_AXIS_NAMES = ("x", "y")

plt.rcParams["svg.hashsalt"] = "edgeform-report"


def _savefig(fig, path: Path, image_format: str) -> None:
    metadata = {"Date": None} if image_format == "svg" else None
    fig.savefig(path, format=image_format, dpi=110, metadata=metadata)
    plt.close(fig)


def render_formation(table: RunTable, out_dir: Path,
                     image_format: str = "png") -> Path:
    """Trajectory trails with initial/final markers and the final shape.

    The final agent polygon doubles as the target-formation reference: the
    errors in a completed run are at numerical zero by the last sample.
    """
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    N = table.num_agents
    for i in range(N):
        color = _AGENT_COLORS[i % len(_AGENT_COLORS)]
        ax.plot(table.positions[:, i, 0], table.positions[:, i, 1],
                color=color, linewidth=1.0, alpha=0.7,
                label=f"agent {i + 1}")
        ax.plot(*table.positions[0, i], marker="o", color=color,
                markersize=6, fillstyle="none")
        ax.plot(*table.positions[-1, i], marker="s", color=color,
                markersize=6)
    poly = np.vstack([table.positions[-1], table.positions[-1, :1]])
    ax.plot(poly[:, 0], poly[:, 1], "k--", linewidth=0.8,
            label="final formation")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(f"{table.name}: formation plane")
    ax.legend(loc="best", fontsize=8)
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    path = out_dir / f"{table.name}_formation.{image_format}"
    _savefig(fig, path, image_format)
    return path


def _clip_bound(bound: np.ndarray, limit: float) -> tuple[np.ndarray, bool]:
    clipped = bool(np.any(~np.isfinite(bound)) or np.any(np.abs(bound) > limit))
    return np.clip(bound, -limit, limit), clipped


def render_funnel(table: RunTable, axis: int, out_dir: Path,
                  image_format: str = "png") -> Path:
    """Edge errors on one axis overlaid with the shaded funnel envelope.

    Infinite or off-scale bounds (global mode at early times) are clipped to
    the plot window and drawn dashed to mark the clipping.
    """
    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    errs = table.errors[:, :, axis]
    finite_hi = table.bounds_hi[np.isfinite(table.bounds_hi[:, axis]), axis]
    finite_lo = table.bounds_lo[np.isfinite(table.bounds_lo[:, axis]), axis]
    limit = 1.5 * max(np.abs(errs).max(initial=0.0),
                      np.abs(finite_hi).max(initial=0.0),
                      np.abs(finite_lo).max(initial=0.0), 1e-3)
    lo, lo_clipped = _clip_bound(table.bounds_lo[:, axis], limit)
    hi, hi_clipped = _clip_bound(table.bounds_hi[:, axis], limit)

    ax.fill_between(table.t, lo, hi, color="#c8c8c8", alpha=0.5,
                    label="performance envelope")
    for bound, clipped in ((lo, lo_clipped), (hi, hi_clipped)):
        ax.plot(table.t, bound, color="#606060", linewidth=1.0,
                linestyle="--" if clipped else "-")
    for k in range(table.num_edges):
        ax.plot(table.t, errs[:, k], linewidth=1.0,
                color=_AGENT_COLORS[k % len(_AGENT_COLORS)],
                label=f"edge {k + 1}")
    ax.set_xlabel("t [s]")
    ax.set_ylabel(f"relative error ({_AXIS_NAMES[axis]})")
    ax.set_title(f"{table.name}: funnel, {_AXIS_NAMES[axis]} axis")
    ax.set_ylim(-limit * 1.05, limit * 1.05)
    ax.legend(loc="upper right", fontsize=7, ncol=2)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = out_dir / f"{table.name}_funnel_{_AXIS_NAMES[axis]}.{image_format}"
    _savefig(fig, path, image_format)
    return path


def render_all(table: RunTable, out_dir: Path, kind: str = "both",
               image_format: str = "png") -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if kind in ("formation", "both"):
        written.append(render_formation(table, out_dir, image_format))
    if kind in ("funnel", "both"):
        for axis in range(table.errors.shape[2]):
            written.append(render_funnel(table, axis, out_dir, image_format))
    return written
