"""Trajectories, their file formats, outlier smoothing and MAE evaluation.

CSV formats:
    trajectory:   timestamp_s,x_m,y_m,z_m          (6 decimal places)
    ground truth: timestamp_s,x_m,y_m,z_m,active   (active is 0/1)
    activity:     timestamp_s,active
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError


@dataclass
class Trajectory:
    """Timestamped 3D positions in a named coordinate frame."""

    timestamps: np.ndarray
    positions: np.ndarray
    frame: str = "array-local"

    def __post_init__(self) -> None:
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.shape != (len(self.timestamps), 3):
            raise InputError("positions must be (len(timestamps), 3)")
        if np.any(np.diff(self.timestamps) <= 0):
            raise InputError("trajectory timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.timestamps)

    def copy(self) -> "Trajectory":
        return Trajectory(self.timestamps.copy(), self.positions.copy(), self.frame)


def write_trajectory_csv(path: str | Path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp_s", "x_m", "y_m", "z_m"])
        for t, p in zip(traj.timestamps, traj.positions):
            writer.writerow([f"{t:.6f}", f"{p[0]:.6f}", f"{p[1]:.6f}", f"{p[2]:.6f}"])


def write_ground_truth_csv(path: str | Path, traj: Trajectory,
                           active: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp_s", "x_m", "y_m", "z_m", "active"])
        for t, p, a in zip(traj.timestamps, traj.positions, active):
            writer.writerow([f"{t:.6f}", f"{p[0]:.6f}", f"{p[1]:.6f}",
                             f"{p[2]:.6f}", int(a)])


def write_activity_csv(path: str | Path, timestamps: np.ndarray,
                       active: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp_s", "active"])
        for t, a in zip(timestamps, active):
            writer.writerow([f"{t:.6f}", int(a)])


def _read_rows(path: str | Path, minimum_columns: int) -> tuple[list[str], list[list[float]]]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path} is empty")
        rows = [[float(v) for v in row] for row in reader if row]
    if any(len(row) < minimum_columns for row in rows):
        raise InputError(f"{path}: expected at least {minimum_columns} columns")
    return header, rows


def read_trajectory_csv(path: str | Path, frame: str = "array-local") -> Trajectory:
    """Read a trajectory CSV; a trailing `active` column is ignored."""
    _, rows = _read_rows(path, 4)
    arr = np.asarray(rows)
    return Trajectory(arr[:, 0], arr[:, 1:4], frame=frame)


def read_ground_truth_csv(path: str | Path) -> tuple[Trajectory, np.ndarray | None]:
    """Read a ground-truth CSV; returns (trajectory, active-or-None)."""
    header, rows = _read_rows(path, 4)
    arr = np.asarray(rows)
    active = arr[:, 4].astype(bool) if "active" in header and arr.shape[1] > 4 else None
    return Trajectory(arr[:, 0], arr[:, 1:4]), active


def read_activity_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    _, rows = _read_rows(path, 2)
    arr = np.asarray(rows)
    return arr[:, 0], arr[:, 1].astype(bool)


def to_angles(position: np.ndarray) -> tuple[float, float]:
    """Azimuth and elevation (degrees) of an array-local position.

    Azimuth is measured from broadside (+y), positive toward +x; elevation
    from the horizontal plane toward +z.
    """
    x, y, z = (float(v) for v in position)
    if x == 0.0 and y == 0.0 and z == 0.0:
        raise InputError("cannot compute angles of the zero vector")
    azimuth = math.degrees(math.atan2(x, y))
    elevation = math.degrees(math.atan2(z, math.hypot(x, y)))
    return azimuth, elevation


def _angles_of(positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if np.any(np.all(positions == 0.0, axis=1)):
        raise InputError("cannot compute angles of the zero vector")
    az = np.degrees(np.arctan2(positions[:, 0], positions[:, 1]))
    el = np.degrees(np.arctan2(positions[:, 2], np.hypot(positions[:, 0],
                                                         positions[:, 1])))
    return az, el


@dataclass
class SmoothResult:
    trajectory: Trajectory
    converged: bool
    iterations: int


def smooth_outliers(traj: Trajectory, v_max: float,
                    max_iters: int = 15) -> SmoothResult:
    """Iteratively replace velocity outliers by interpolating stable neighbors.

    Each iteration finds the earliest entry whose instantaneous speed exceeds
    v_max and replaces the span [t-1, t+2] by linear interpolation between
    the nearest entries outside the span that were never replaced during this
    call; interpolating from already-replaced entries would propagate the
    outliers.  Stops once the maximum speed is within v_max or after
    max_iters iterations.
    """
    if len(traj) < 4:
        raise InputError("smoothing needs at least 4 trajectory entries")
    if max_iters < 1:
        raise InputError("max_iters must be at least 1")
    times = traj.timestamps
    pos = traj.positions.copy()
    replaced: set[int] = set()
    n = len(traj)
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        speeds = np.linalg.norm(np.diff(pos, axis=0), axis=1) / np.diff(times)
        over = np.flatnonzero(speeds > v_max)
        if len(over) == 0:
            converged = True
            iterations -= 1
            break
        t = int(over[0]) + 1          # entry index whose step is too fast
        lo = max(t - 1, 0)
        hi = min(t + 2, n - 1)
        left = next((k for k in range(lo - 1, -1, -1) if k not in replaced), None)
        right = next((k for k in range(hi + 1, n) if k not in replaced), None)
        if left is None and right is None:
            break
        for k in range(lo, hi + 1):
            replaced.add(k)
            if left is None:
                pos[k] = pos[right]
            elif right is None:
                pos[k] = pos[left]
            else:
                w = (times[k] - times[left]) / (times[right] - times[left])
                pos[k] = pos[left] + w * (pos[right] - pos[left])
    else:
        speeds = np.linalg.norm(np.diff(pos, axis=0), axis=1) / np.diff(times)
        converged = bool(np.all(speeds <= v_max))
        iterations = max_iters
    return SmoothResult(
        trajectory=Trajectory(times.copy(), pos, traj.frame),
        converged=converged,
        iterations=iterations,
    )


@dataclass
class EvalReport:
    """MAE of an estimated trajectory over the voice-active frames."""

    mae_3d: float
    mae_azimuth: float
    mae_elevation: float
    active_frame_count: int

    def to_dict(self) -> dict:
        return {
            "mae_3d_m": self.mae_3d,
            "mae_azimuth_deg": self.mae_azimuth,
            "mae_elevation_deg": self.mae_elevation,
            "active_frame_count": self.active_frame_count,
        }

    def format_table(self) -> str:
        rows = [
            ("3D MAE", f"{self.mae_3d:.4f} m"),
            ("azimuth MAE", f"{self.mae_azimuth:.3f} deg"),
            ("elevation MAE", f"{self.mae_elevation:.3f} deg"),
            ("active frames", str(self.active_frame_count)),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def wrap_degrees(angles: np.ndarray) -> np.ndarray:
    """Wrap angle differences into [-180, 180)."""
    return (angles + 180.0) % 360.0 - 180.0


def evaluate(est: Trajectory, truth: Trajectory,
             active_timestamps: np.ndarray) -> EvalReport:
    """MAE in 3D, azimuth and elevation over the active frames.

    Estimate frames are matched to ground-truth entries by nearest timestamp
    within half the estimate frame period; a frame counts as active when an
    active timestamp lies within the same tolerance.
    """
    active_timestamps = np.sort(np.asarray(active_timestamps, dtype=float))
    if active_timestamps.size == 0:
        raise InputError("active timestamp set is empty")
    if len(est) > 1:
        half_period = float(np.median(np.diff(est.timestamps))) / 2.0
    else:
        half_period = float(np.median(np.diff(truth.timestamps))) / 2.0

    def nearest(sorted_ts: np.ndarray, query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        idx = np.clip(np.searchsorted(sorted_ts, query), 1, len(sorted_ts) - 1)
        idx = np.where(
            np.abs(sorted_ts[idx] - query) < np.abs(sorted_ts[idx - 1] - query),
            idx, idx - 1,
        )
        return idx, np.abs(sorted_ts[idx] - query)

    truth_idx, truth_gap = nearest(truth.timestamps, est.timestamps)
    matched = truth_gap <= half_period + 1e-12
    if not np.any(matched):
        raise InputError("no estimate frame matches the ground truth timestamps")
    _, active_gap = nearest(active_timestamps, est.timestamps)
    use = matched & (active_gap <= half_period + 1e-12)
    if not np.any(use):
        raise InputError("no active frames overlap the estimate")

    p_est = est.positions[use]
    p_truth = truth.positions[truth_idx[use]]
    err_3d = np.linalg.norm(p_est - p_truth, axis=1)
    az_est, el_est = _angles_of(p_est)
    az_truth, el_truth = _angles_of(p_truth)
    az_err = np.abs(wrap_degrees(az_est - az_truth))
    el_err = np.abs(el_est - el_truth)
    return EvalReport(
        mae_3d=float(np.mean(err_3d)),
        mae_azimuth=float(np.mean(az_err)),
        mae_elevation=float(np.mean(el_err)),
        active_frame_count=int(np.sum(use)),
    )
