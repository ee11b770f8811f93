"""Microphone array geometry: positions, pair lists and rigid transforms.

The array-local frame has the microphone line along x, broadside pointing
toward +y and z up.  A geometry JSON file lists mic positions in this frame,
the pair list used for correlation, a planarity flag (all mics in the y=0
plane, which makes front/back mirror positions indistinguishable) and an
optional table of per-timestamp rigid transforms for moving-array recordings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError


@dataclass
class RigidTransform:
    """Maps array-local coordinates into the recording frame: x' = R x + t."""

    rotation: np.ndarray     # (3, 3)
    translation: np.ndarray  # (3,)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation


IDENTITY_TRANSFORM = RigidTransform(np.eye(3), np.zeros(3))


@dataclass
class MicArrayGeometry:
    """Microphone positions (meters, array-local) plus the active pair list.

    Attributes:
        mic_positions: (n_mics, 3) array of positions.
        pairs: list of (i, j) mic index pairs used for correlation.
        planar: True when every mic lies in the y=0 plane (front-back
            ambiguous); declared, not inferred.
        transform_times: optional (T,) timestamps for per-frame transforms.
        transforms: optional list of RigidTransform, aligned with
            transform_times.
    """

    mic_positions: np.ndarray
    pairs: list[tuple[int, int]]
    planar: bool = True
    transform_times: np.ndarray | None = None
    transforms: list[RigidTransform] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.mic_positions = np.asarray(self.mic_positions, dtype=float)
        if self.mic_positions.ndim != 2 or self.mic_positions.shape[1] != 3:
            raise InputError("mic_positions must be an (n, 3) array")
        n = len(self.mic_positions)
        seen = set()
        for i, j in self.pairs:
            if i == j:
                raise InputError(f"pair ({i}, {j}) uses the same mic twice")
            if not (0 <= i < n and 0 <= j < n):
                raise InputError(f"pair ({i}, {j}) out of range for {n} mics")
            if self.pair_distance((i, j)) <= 0.0:
                raise InputError(f"pair ({i}, {j}) has zero inter-mic distance")
            seen.add((i, j))
        if not self.pairs:
            raise InputError("geometry declares no microphone pairs")

    @property
    def n_mics(self) -> int:
        return len(self.mic_positions)

    def pair_distance(self, pair: tuple[int, int]) -> float:
        i, j = pair
        return float(np.linalg.norm(self.mic_positions[i] - self.mic_positions[j]))

    @property
    def moving(self) -> bool:
        """True when more than one distinct rigid transform is declared."""
        return len(self.transforms) > 1

    def transform_at(self, t: float) -> RigidTransform:
        """Rigid transform nearest in time to t (identity when none given)."""
        if not self.transforms:
            return IDENTITY_TRANSFORM
        k = int(np.argmin(np.abs(self.transform_times - t)))
        return self.transforms[k]

    def mic_positions_at(self, t: float) -> np.ndarray:
        """Mic positions in the recording frame at time t."""
        return self.transform_at(t).apply(self.mic_positions)

    def to_dict(self) -> dict:
        out: dict = {
            "mics": [
                {"id": k, "x": float(p[0]), "y": float(p[1]), "z": float(p[2])}
                for k, p in enumerate(self.mic_positions)
            ],
            "pairs": [[int(i), int(j)] for i, j in self.pairs],
            "planar": bool(self.planar),
        }
        if self.transforms:
            rows = []
            for t, tf in zip(self.transform_times, self.transforms):
                rows.append(
                    [float(t)]
                    + [float(v) for v in tf.translation]
                    + [float(v) for v in tf.rotation.reshape(9)]
                )
            out["transforms"] = rows
        return out

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def geometry_from_dict(data: dict) -> MicArrayGeometry:
    try:
        mics = sorted(data["mics"], key=lambda m: int(m["id"]))
        positions = np.array([[m["x"], m["y"], m["z"]] for m in mics], dtype=float)
        pairs = [(int(i), int(j)) for i, j in data["pairs"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed geometry description: {exc}") from exc
    times = None
    transforms: list[RigidTransform] = []
    for row in data.get("transforms", []):
        if len(row) != 13:
            raise InputError("transform rows must be t, tx, ty, tz, r11..r33")
        t, tx, ty, tz = row[:4]
        rot = np.array(row[4:], dtype=float).reshape(3, 3)
        transforms.append(RigidTransform(rot, np.array([tx, ty, tz], dtype=float)))
        times = [] if times is None else times
        times.append(float(t))
    return MicArrayGeometry(
        mic_positions=positions,
        pairs=pairs,
        planar=bool(data.get("planar", True)),
        transform_times=None if times is None else np.asarray(times),
        transforms=transforms,
    )


def load_geometry(path: str | Path) -> MicArrayGeometry:
    """Read a geometry JSON file."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"geometry file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"geometry file is not valid JSON: {exc}") from exc
    return geometry_from_dict(data)


# x offsets (m) of the 13 in-line mics of the bundled planar array: nested
# sub-arrays with 4, 8, 16 and 32 cm adjacent spacings, 2.24 m end to end.
_LINE_X = (-1.12, -0.80, -0.48, -0.16, -0.08, -0.04, 0.0,
           0.04, 0.08, 0.16, 0.48, 0.80, 1.12)
_LINE_HEIGHT = 1.5
_TOP_OFFSET = 0.32

# Default pair selection: four horizontal pairs with 0.32 m spacing plus the
# two vertical 0.32 m pairs against the elevated end mics.  The published
# array this layout imitates never enumerates pair indices, so this list is
# an interpretation; override it in the geometry file.
_DEFAULT_PAIRS = (
    (1, 2),    # -0.80 / -0.48
    (3, 9),    # -0.16 / +0.16
    (10, 11),  # +0.48 / +0.80
    (2, 3),    # -0.48 / -0.16  (0.32 m apart)
    (0, 13),   # left end mic / elevated left
    (12, 14),  # right end mic / elevated right
)


def planar_array_geometry(pairs: list[tuple[int, int]] | None = None) -> MicArrayGeometry:
    """Bundled 15-mic planar array: 13 mics in a nested line at z=1.5 m plus
    two mics 0.32 m above the outermost ones.  All mics sit in the y=0 plane.
    """
    line = [(x, 0.0, _LINE_HEIGHT) for x in _LINE_X]
    top = [(-1.12, 0.0, _LINE_HEIGHT + _TOP_OFFSET),
           (1.12, 0.0, _LINE_HEIGHT + _TOP_OFFSET)]
    return MicArrayGeometry(
        mic_positions=np.array(line + top),
        pairs=list(pairs) if pairs is not None else [tuple(p) for p in _DEFAULT_PAIRS],
        planar=True,
    )
