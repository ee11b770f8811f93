"""Optional import harness for LOCATA-style recording directories.

The corpus itself is not redistributable, so this module only converts
user-supplied files into the package's own formats.  Expected layout inside
a recording directory (whitespace-separated tables with a named header row;
wall-clock columns year/month/day/hour/minute/second):

    audio_array_<array>.wav           multichannel recording
    position_source_<name>.txt        time columns + x y z   (ground truth)
    position_array_<array>.txt        time columns + optional per-mic
                                      columns named like mic1_x mic1_y ...
    required_time.txt                 time columns; first row anchors t=0
    VAD_<name>.txt                    time columns + activity column

Only the source positions, activity and audio are required; geometry is
emitted only when the array table carries per-mic columns.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InputError
from .geometry import MicArrayGeometry
from .trajectory import Trajectory, write_activity_csv, write_ground_truth_csv

_TIME_COLUMNS = ("year", "month", "day", "hour", "minute", "second")


def read_table(path: Path) -> tuple[list[str], np.ndarray]:
    """Read a whitespace-separated table with a header row."""
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise InputError(f"{path}: expected a header row and at least one data row")
    header = [name.strip().lower() for name in lines[0].replace(",", " ").split()]
    rows = []
    for ln in lines[1:]:
        values = ln.replace(",", " ").split()
        if len(values) != len(header):
            raise InputError(f"{path}: row width {len(values)} != header width {len(header)}")
        rows.append([float(v) for v in values])
    return header, np.asarray(rows)


def _wall_seconds(header: list[str], table: np.ndarray) -> np.ndarray:
    """Seconds-of-day from the wall-clock columns (day boundaries unsupported)."""
    try:
        h = table[:, header.index("hour")]
        m = table[:, header.index("minute")]
        s = table[:, header.index("second")]
    except ValueError as exc:
        raise InputError(f"table lacks wall-clock columns {exc}") from exc
    return h * 3600.0 + m * 60.0 + s


def _find_one(directory: Path, pattern: str) -> Path | None:
    matches = sorted(directory.glob(pattern))
    return matches[0] if matches else None


def _rotate_about_z(points: np.ndarray, degrees: float) -> np.ndarray:
    rad = np.radians(degrees)
    rot = np.array([
        [np.cos(rad), -np.sin(rad), 0.0],
        [np.sin(rad), np.cos(rad), 0.0],
        [0.0, 0.0, 1.0],
    ])
    return points @ rot.T


def import_recording(
    recording_dir: Path,
    array_name: str,
    out_dir: Path,
    azimuth_offset_deg: float = 0.0,
) -> dict[str, Path]:
    """Convert one recording directory; returns the written/located paths.

    azimuth_offset_deg rotates the ground-truth positions about z to line the
    corpus' angle convention up with this package's broadside-zero azimuth.
    """
    recording_dir = Path(recording_dir)
    if not recording_dir.is_dir():
        raise InputError(f"not a directory: {recording_dir}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    produced: dict[str, Path] = {}

    audio = _find_one(recording_dir, f"audio_array_{array_name}*.wav")
    if audio is None:
        raise InputError(f"no audio_array_{array_name}*.wav in {recording_dir}")
    produced["audio"] = audio

    source_table = _find_one(recording_dir, "position_source_*.txt")
    if source_table is None:
        raise InputError(f"no position_source_*.txt in {recording_dir}")
    header, table = read_table(source_table)
    seconds = _wall_seconds(header, table)

    anchor = seconds[0]
    required = _find_one(recording_dir, "required_time*.txt")
    if required is not None:
        req_header, req_table = read_table(required)
        anchor = _wall_seconds(req_header, req_table)[0]
    seconds = seconds - anchor

    try:
        cols = [header.index(axis) for axis in ("x", "y", "z")]
    except ValueError as exc:
        raise InputError(f"{source_table}: missing position column {exc}") from exc
    positions = _rotate_about_z(table[:, cols], azimuth_offset_deg)
    keep = np.concatenate(([True], np.diff(seconds) > 0))
    truth = Trajectory(seconds[keep], positions[keep], frame="world")

    active = np.ones(len(truth), dtype=bool)
    vad = _find_one(recording_dir, "VAD_*.txt")
    if vad is not None:
        vad_header, vad_table = read_table(vad)
        vad_seconds = _wall_seconds(vad_header, vad_table) - anchor
        flags = vad_table[:, -1] > 0.5
        idx = np.clip(np.searchsorted(vad_seconds, truth.timestamps), 0,
                      len(vad_seconds) - 1)
        active = flags[idx]

    truth_path = out_dir / "truth.csv"
    write_ground_truth_csv(truth_path, truth, active)
    produced["truth"] = truth_path
    activity_path = out_dir / "activity.csv"
    write_activity_csv(activity_path, truth.timestamps, active)
    produced["activity"] = activity_path

    array_table = _find_one(recording_dir, f"position_array_{array_name}*.txt")
    if array_table is not None:
        geom = _geometry_from_array_table(*read_table(array_table))
        if geom is not None:
            geometry_path = out_dir / "geometry.json"
            geom.save(geometry_path)
            produced["geometry"] = geometry_path
    return produced


def _geometry_from_array_table(header: list[str], table: np.ndarray
                               ) -> MicArrayGeometry | None:
    """Build a geometry from per-mic columns (mic<k>_x/_y/_z), if present.

    Uses the first row's positions; pairs default to every adjacent mic pair
    and should normally be overridden by hand.
    """
    mic_ids = sorted({
        int(name[3:name.index("_")])
        for name in header
        if name.startswith("mic") and name.endswith("_x") and name[3:-2].isdigit()
    })
    if not mic_ids:
        return None
    positions = []
    for k in mic_ids:
        cols = [header.index(f"mic{k}_{axis}") for axis in ("x", "y", "z")]
        positions.append(table[0, cols])
    pairs = [(k, k + 1) for k in range(len(mic_ids) - 1)]
    return MicArrayGeometry(np.asarray(positions), pairs, planar=True)
