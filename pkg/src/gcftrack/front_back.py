"""Front-back crossing detection from the map peak-value profile.

A planar array of omnidirectional mics cannot distinguish a source from its
mirror image across the array plane, but the array frame attenuates sound
arriving from behind, which depresses the map peak values.  Comparing the
running forward average of the peak values against the running backward
average exposes a single front/back crossing as a swing of their ratio; the
trajectory is then corrected by reversing y on the affected side.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .trajectory import Trajectory

FRONT_TO_BACK = "front_to_back"
BACK_TO_FRONT = "back_to_front"
NONE = "none"


@dataclass
class TurningDecision:
    """Outcome of the crossing search.

    Attributes:
        kind: "front_to_back", "back_to_front" or "none".
        frame: 0-based index of the turning frame (None when kind is "none").
        ratio_fb: per-frame forward/backward average ratio (NaN where the
            backward average is not positive).
        ratio_bf: its reciprocal, indicating back-to-front motion.
    """

    kind: str
    frame: int | None
    ratio_fb: np.ndarray
    ratio_bf: np.ndarray


def peak_averages(peaks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Running forward and backward means of the peak values.

    forward[k] averages peaks[0..k] inclusive; backward[k] averages
    peaks[k..end] inclusive.
    """
    peaks = np.asarray(peaks, dtype=float)
    if peaks.size == 0:
        raise InputError("peak sequence is empty")
    counts = np.arange(1, len(peaks) + 1)
    forward = np.cumsum(peaks) / counts
    backward = np.cumsum(peaks[::-1])[::-1] / counts[::-1]
    return forward, backward


def gcf_ratios(peaks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward/backward ratio and its reciprocal, NaN where undefined."""
    forward, backward = peak_averages(peaks)
    with np.errstate(divide="ignore", invalid="ignore"):
        fb = np.where(backward > 0, forward / backward, np.nan)
        bf = np.where(forward > 0, backward / forward, np.nan)
    return fb, bf


def detect_turning(peaks: np.ndarray, t0: int | None = None,
                   kappa: float = 1.9) -> TurningDecision:
    """Find the single front/back turning frame, if any.

    The search window is the open interval (t0, T - t0) in 1-based frame
    numbers, i.e. 0-based indices t0 .. T - t0 - 2.  The crossing is accepted
    only when the winning ratio reaches kappa and beats the opposite
    direction's best.

    Args:
        peaks: per-frame map peak values.
        t0: margin excluded at each end; defaults to max(1, round(0.1 * T)).
        kappa: ratio threshold.
    """
    peaks = np.asarray(peaks, dtype=float)
    big_t = len(peaks)
    if t0 is None:
        t0 = max(1, int(round(0.1 * big_t)))
    if t0 < 1 or 2 * t0 >= big_t:
        raise InputError(f"degenerate search window: t0={t0} for {big_t} frames")
    fb, bf = gcf_ratios(peaks)

    lo, hi = t0, big_t - t0 - 1          # half-open [lo, hi) of 0-based indices
    window_fb = fb[lo:hi]
    window_bf = bf[lo:hi]

    def best(values: np.ndarray) -> tuple[float, int]:
        if np.all(np.isnan(values)):
            return -np.inf, -1
        k = int(np.nanargmax(values))
        return float(values[k]), lo + k

    best_fb, frame_fb = best(window_fb)
    best_bf, frame_bf = best(window_bf)
    if best_fb >= kappa and best_fb > best_bf:
        return TurningDecision(FRONT_TO_BACK, frame_fb, fb, bf)
    if best_bf >= kappa and best_bf > best_fb:
        return TurningDecision(BACK_TO_FRONT, frame_bf, fb, bf)
    return TurningDecision(NONE, None, fb, bf)


def apply_correction(traj: Trajectory, decision: TurningDecision) -> Trajectory:
    """Reverse the y coordinate on the mirrored side of the turning frame.

    front_to_back flips every estimate from the turning frame onward;
    back_to_front flips every estimate before it (the recording starts
    behind the array).  Applying the same correction twice restores the
    input.
    """
    out = traj.copy()
    if decision.kind == NONE:
        return out
    if decision.frame is None:
        raise InputError("turning decision carries no frame index")
    if decision.kind == FRONT_TO_BACK:
        out.positions[decision.frame:, 1] *= -1.0
    elif decision.kind == BACK_TO_FRONT:
        out.positions[:decision.frame, 1] *= -1.0
    else:
        raise InputError(f"unknown decision kind {decision.kind!r}")
    return out


def write_ratio_csv(path: str | Path, timestamps: np.ndarray,
                    decision: TurningDecision) -> None:
    """Dump the two ratio curves for plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp_s", "ratio_front_back", "ratio_back_front"])
        for t, r_fb, r_bf in zip(timestamps, decision.ratio_fb, decision.ratio_bf):
            writer.writerow([f"{t:.6f}", f"{r_fb:.9f}", f"{r_bf:.9f}"])
