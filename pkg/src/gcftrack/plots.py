"""Figure rendering for the CLI report path.

Figures are written to files next to the delimited output; nothing here is
interactive, so the Agg backend is forced before pyplot is imported.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .front_back import TurningDecision
from .geometry import MicArrayGeometry
from .trajectory import Trajectory


def save_trajectory_figure(
    path: str | Path,
    traj: Trajectory,
    truth: Trajectory | None = None,
    geom: MicArrayGeometry | None = None,
) -> None:
    """Top view plus per-axis time series of a trajectory."""
    fig, (ax_top, ax_time) = plt.subplots(1, 2, figsize=(11, 4.5))
    ax_top.plot(traj.positions[:, 0], traj.positions[:, 1], ".-",
                ms=3, lw=0.8, label="estimate")
    if truth is not None:
        ax_top.plot(truth.positions[:, 0], truth.positions[:, 1], "-",
                    lw=1.2, alpha=0.7, label="ground truth")
    if geom is not None:
        ax_top.plot(geom.mic_positions[:, 0], geom.mic_positions[:, 1], "ks",
                    ms=4, label="mics")
    ax_top.set_xlabel("x [m]")
    ax_top.set_ylabel("y [m]")
    ax_top.set_title("top view")
    ax_top.axis("equal")
    ax_top.legend(loc="best", fontsize=8)

    for axis, name in enumerate("xyz"):
        ax_time.plot(traj.timestamps, traj.positions[:, axis], lw=1.0,
                     label=f"{name} estimate")
        if truth is not None:
            ax_time.plot(truth.timestamps, truth.positions[:, axis], "--",
                         lw=0.8, alpha=0.6, label=f"{name} truth")
    ax_time.set_xlabel("time [s]")
    ax_time.set_ylabel("position [m]")
    ax_time.set_title("coordinates over time")
    ax_time.legend(loc="best", fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_ratio_figure(
    path: str | Path,
    timestamps: np.ndarray,
    peak_values: np.ndarray,
    decision: TurningDecision,
    kappa: float,
) -> None:
    """Map peak values and the front-back / back-front ratio curves."""
    fig, (ax_peaks, ax_ratio) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax_peaks.plot(timestamps, peak_values, lw=0.9, color="tab:gray")
    ax_peaks.set_ylabel("map peak value")
    ax_peaks.set_title("per-frame map peaks")

    ax_ratio.plot(timestamps, decision.ratio_fb, color="m", lw=1.2,
                  label="forward/backward")
    ax_ratio.plot(timestamps, decision.ratio_bf, color="tab:blue", lw=1.2,
                  label="backward/forward")
    ax_ratio.axhline(kappa, color="k", ls=":", lw=1.0,
                     label=f"threshold {kappa:g}")
    if decision.frame is not None:
        ax_ratio.axvline(timestamps[decision.frame], color="g", ls="--", lw=1.0,
                         label=f"turning ({decision.kind})")
    ax_ratio.set_xlabel("time [s]")
    ax_ratio.set_ylabel("ratio")
    ax_ratio.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_map_slice_figure(
    path: str | Path,
    xs: np.ndarray,
    ys: np.ndarray,
    values: np.ndarray,
    z: float,
    geom: MicArrayGeometry | None = None,
) -> None:
    """Heatmap of one horizontal slice of the acoustic map."""
    fig, ax = plt.subplots(figsize=(7, 5.5))
    mesh = ax.pcolormesh(xs, ys, values, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="coherence")
    if geom is not None:
        ax.plot(geom.mic_positions[:, 0], geom.mic_positions[:, 1], "wo",
                ms=4, mec="k")
    peak = np.unravel_index(np.argmax(values), values.shape)
    ax.plot(xs[peak[1]], ys[peak[0]], "r+", ms=12, mew=2)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"acoustic map at z = {z:g} m")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
