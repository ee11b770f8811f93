"""Global coherence field: 3D search grid, TDOA lookup and map evaluation.

The map value at a candidate point is the average of the per-pair PHAT
correlations evaluated at that point's geometric TDOAs; the per-frame
localization estimate is the grid argmax.  The lookup table is the hot path:
fractional lags are precomputed per (pair, point) so a frame evaluation
reduces to gathers and one fused linear interpolation per pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError
from .gcc_phat import SPEED_OF_SOUND, pair_max_lag
from .geometry import MicArrayGeometry


@dataclass
class Grid3D:
    """Regular 3D lattice over closed ranges, enumerated x fastest, then y,
    then z."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    z_range: tuple[float, float]
    step: float

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise InputError("grid step must be positive")
        for name, (lo, hi) in zip("xyz", (self.x_range, self.y_range, self.z_range)):
            if hi <= lo:
                raise InputError(f"degenerate {name}_range: [{lo}, {hi}]")
        self.axes = tuple(
            lo + self.step * np.arange(int((hi - lo) / self.step + 1e-9) + 1)
            for lo, hi in (self.x_range, self.y_range, self.z_range)
        )
        self.shape = tuple(len(ax) for ax in self.axes)
        self.n_points = int(np.prod(self.shape))
        self.lower = np.array([self.x_range[0], self.y_range[0], self.z_range[0]])
        self.upper = np.array([self.x_range[1], self.y_range[1], self.z_range[1]])

    def points(self) -> np.ndarray:
        """All lattice points as an (n_points, 3) array in enumeration order."""
        gx, gy, gz = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack(
            [gx.ravel(order="F"), gy.ravel(order="F"), gz.ravel(order="F")]
        )

    def point_at(self, flat_index: int) -> np.ndarray:
        nx, ny, _ = self.shape
        ix = flat_index % nx
        iy = (flat_index // nx) % ny
        iz = flat_index // (nx * ny)
        return np.array(
            [self.axes[0][ix], self.axes[1][iy], self.axes[2][iz]]
        )

    def nearest_indices(self, positions: np.ndarray) -> np.ndarray:
        """Flat lattice index of the nearest grid point for each position."""
        positions = np.atleast_2d(positions)
        nx, ny, _ = self.shape
        idx = []
        for axis in range(3):
            lo = self.axes[axis][0]
            k = np.rint((positions[:, axis] - lo) / self.step).astype(int)
            idx.append(np.clip(k, 0, self.shape[axis] - 1))
        return idx[0] + nx * (idx[1] + ny * idx[2])

    def clamp(self, positions: np.ndarray) -> np.ndarray:
        """Clamp positions into the grid bounding box."""
        return np.clip(positions, self.lower, self.upper)


@dataclass
class TdoaLookup:
    """Per (pair, grid point) fractional lags, ready for map evaluation.

    Attributes:
        lags: (M, P) geometric TDOA in samples, sign = delay of the pair's
            first mic relative to its second.
        gather_lo: (M, P) int32 index of the lower interpolation lag within
            pair m's correlation array (clipped for edge/flagged points).
        frac: (M, P) interpolation fraction.
        valid: (M, P) False where |lag| exceeds the pair's max lag; such
            points contribute zero for that pair.
        max_lags: (M,) per-pair correlation half-width, samples.
    """

    lags: np.ndarray
    gather_lo: np.ndarray
    frac: np.ndarray
    valid: np.ndarray
    max_lags: np.ndarray
    sample_rate: float

    @property
    def n_pairs(self) -> int:
        return len(self.max_lags)

    def tau_seconds(self, pair: int) -> np.ndarray:
        return self.lags[pair] / self.sample_rate


def build_tdoa_lookup(
    grid: Grid3D,
    geom: MicArrayGeometry,
    sample_rate: float,
    c: float = SPEED_OF_SOUND,
    mic_positions: np.ndarray | None = None,
    max_lags: Sequence[int] | None = None,
) -> TdoaLookup:
    """Precompute per-pair fractional lags for every grid point.

    Args:
        mic_positions: override for the geometry's positions (already
            transformed into the grid frame); used to rebuild the lookup per
            frame for moving arrays.
        max_lags: per-pair correlation half-widths; defaults to the
            physically admissible lag per pair plus slack.
    """
    mics = geom.mic_positions if mic_positions is None else np.asarray(mic_positions)
    points = grid.points()
    m_pairs = len(geom.pairs)
    if max_lags is None:
        max_lags = [
            pair_max_lag(float(np.linalg.norm(mics[i] - mics[j])), sample_rate, c)
            for i, j in geom.pairs
        ]
    max_lags = np.asarray(max_lags, dtype=int)

    lags = np.empty((m_pairs, grid.n_points))
    gather_lo = np.empty((m_pairs, grid.n_points), dtype=np.int32)
    frac = np.empty((m_pairs, grid.n_points))
    valid = np.empty((m_pairs, grid.n_points), dtype=bool)
    for m, (i, j) in enumerate(geom.pairs):
        if np.allclose(mics[i], mics[j]):
            raise InputError(f"pair ({i}, {j}) has zero distance")
        d_first = np.linalg.norm(points - mics[i], axis=1)
        d_second = np.linalg.norm(points - mics[j], axis=1)
        lag = (d_first - d_second) / c * sample_rate
        big_l = max_lags[m]
        lags[m] = lag
        valid[m] = np.abs(lag) <= big_l
        lo = np.clip(np.floor(lag), -big_l, big_l - 1)
        gather_lo[m] = (lo + big_l).astype(np.int32)
        frac[m] = np.clip(lag - lo, 0.0, 1.0)
    return TdoaLookup(
        lags=lags,
        gather_lo=gather_lo,
        frac=frac,
        valid=valid,
        max_lags=max_lags,
        sample_rate=sample_rate,
    )


@dataclass
class GcfFrame:
    """Acoustic-map peak of one frame (optionally with the full map)."""

    timestamp: float
    peak_position: np.ndarray
    peak_value: float
    peak_index: int
    map_values: np.ndarray | None = None


def gcf_frame(
    pair_correlations: Sequence[np.ndarray],
    lookup: TdoaLookup,
    grid: Grid3D,
    timestamp: float = 0.0,
    return_map: bool = False,
) -> GcfFrame:
    """Evaluate the coherence field for one frame and extract its peak.

    Args:
        pair_correlations: per-pair correlation arrays for this timestamp,
            each of length 2 * max_lags[m] + 1.

    Ties in the argmax resolve to the lowest enumeration index.
    """
    if len(pair_correlations) == 0:
        raise InputError("at least one pair correlation is required")
    if len(pair_correlations) != lookup.n_pairs:
        raise InputError(
            f"got {len(pair_correlations)} correlations for {lookup.n_pairs} pairs"
        )
    acc = np.zeros(grid.n_points)
    for m, corr in enumerate(pair_correlations):
        expected = 2 * lookup.max_lags[m] + 1
        if len(corr) != expected:
            raise InputError(
                f"pair {m} correlation length {len(corr)} != {expected}"
            )
        lo = corr[lookup.gather_lo[m]]
        hi = corr[lookup.gather_lo[m] + 1]
        vals = lo + lookup.frac[m] * (hi - lo)
        vals[~lookup.valid[m]] = 0.0
        acc += vals
    acc /= len(pair_correlations)
    k = int(np.argmax(acc))
    return GcfFrame(
        timestamp=timestamp,
        peak_position=grid.point_at(k),
        peak_value=float(acc[k]),
        peak_index=k,
        map_values=acc if return_map else None,
    )


def gcf_peaks(
    corr_stacks: Sequence[np.ndarray],
    lookup: TdoaLookup,
    grid: Grid3D,
    timestamps: np.ndarray,
    max_block_elements: int = 2_000_000,
) -> list[GcfFrame]:
    """Peak of every frame's map, evaluated in frame blocks.

    Equivalent to calling gcf_frame per frame (bit-identical peaks) but
    amortizes the gather work: each pair is indexed once per block instead of
    once per frame, which keeps small grids from being dominated by per-call
    overhead.  Block size is capped so scratch arrays stay within
    max_block_elements values.

    Args:
        corr_stacks: per pair, a (T, 2 * max_lags[m] + 1) correlation array.
    """
    if len(corr_stacks) != lookup.n_pairs:
        raise InputError(
            f"got {len(corr_stacks)} correlation stacks for {lookup.n_pairs} pairs"
        )
    t_count = len(timestamps)
    for m, stack in enumerate(corr_stacks):
        if stack.shape != (t_count, 2 * lookup.max_lags[m] + 1):
            raise InputError(f"pair {m} correlation stack has shape {stack.shape}")
    block = max(1, max_block_elements // max(grid.n_points, 1))
    frames: list[GcfFrame] = []
    for start in range(0, t_count, block):
        stop = min(start + block, t_count)
        acc = np.zeros((stop - start, grid.n_points))
        for m, stack in enumerate(corr_stacks):
            seg = stack[start:stop]
            lo = seg[:, lookup.gather_lo[m]]
            hi = seg[:, lookup.gather_lo[m] + 1]
            vals = lo + lookup.frac[m] * (hi - lo)
            vals[:, ~lookup.valid[m]] = 0.0
            acc += vals
        acc /= len(corr_stacks)
        peak_idx = np.argmax(acc, axis=1)
        for row, k in enumerate(peak_idx):
            frames.append(GcfFrame(
                timestamp=float(timestamps[start + row]),
                peak_position=grid.point_at(int(k)),
                peak_value=float(acc[row, k]),
                peak_index=int(k),
            ))
    return frames


def static_estimate(peaks: Sequence[GcfFrame]) -> np.ndarray:
    """Most frequent peak position; ties break to the earliest first seen."""
    if not peaks:
        raise InputError("no frames to take the mode over")
    counts: dict[tuple, int] = {}
    first_seen: dict[tuple, int] = {}
    for order, frame in enumerate(peaks):
        key = tuple(frame.peak_position)
        counts[key] = counts.get(key, 0) + 1
        first_seen.setdefault(key, order)
    best = max(counts, key=lambda k: (counts[k], -first_seen[k]))
    return np.array(best)
