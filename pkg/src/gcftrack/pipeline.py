"""Two-pass orchestration: correlations and map peaks, then tracking.

The likelihood thresholds are fractions of the recording-wide maximum of the
map peak values, so tracking cannot start until every frame's peak is known.
Pass 1 computes spectra, pair correlations and map peaks (parallelizable over
frames) and is cached to disk; pass 2 reloads the cache bit-exactly and runs
the particle filter, front-back correction, outlier smoothing and the
optional evaluation.  Full maps are not cached: the few frames whose
likelihood needs map values get them recomputed from the cached correlations.
"""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, frame_and_transform
from .config import PipelineConfig
from .errors import InputError
from .front_back import TurningDecision, detect_turning, apply_correction
from .gcc_phat import gcc_phat, pair_max_lag
from .gcf import (
    GcfFrame,
    TdoaLookup,
    build_tdoa_lookup,
    gcf_frame,
    gcf_peaks,
    static_estimate,
)
from .geometry import MicArrayGeometry
from .tracking import track
from .trajectory import EvalReport, Trajectory, evaluate, smooth_outliers

logger = logging.getLogger(__name__)

LOW_CONFIDENCE_GAMMA = 1e-6


def plan_timestamps(clip: AudioClip, cfg: PipelineConfig) -> np.ndarray:
    """Output-rate lattice of frame centers that fit the clip and the trim."""
    half_window = cfg.window_length / (2.0 * clip.sample_rate)
    lo = max(cfg.boundary_trim_s, half_window)
    hi = min(clip.duration - cfg.boundary_trim_s, clip.duration - half_window)
    period = 1.0 / cfg.output_rate
    first = int(np.ceil(lo / period - 1e-9))
    last = int(np.floor(hi / period + 1e-9))
    if last < first:
        raise InputError(
            "no frames fit the clip: boundary trim of "
            f"{cfg.boundary_trim_s} s on a {clip.duration:.2f} s recording"
        )
    return np.arange(first, last + 1) * period


@dataclass
class PassOneResult:
    """Cached artifacts of the correlation and map-peak pass."""

    timestamps: np.ndarray
    correlations: list[np.ndarray]    # per pair: (T, 2 * max_lag + 1)
    max_lags: np.ndarray
    peaks: list[GcfFrame]
    gamma: float
    gcf_seconds: float
    key: str

    @property
    def peak_values(self) -> np.ndarray:
        return np.array([p.peak_value for p in self.peaks])


def _frame_correlations(clip, geom, cfg, t, max_lags):
    frame = frame_and_transform(clip, cfg.window_length, [t], cfg.window_kind)
    if frame.n_frames == 0:
        return None
    spectra = frame.spectra[0]
    out = []
    for m, (i, j) in enumerate(geom.pairs):
        # lag convention: positive = first mic of the pair receives later
        out.append(gcc_phat(spectra[j], spectra[i], max_lags[m], cfg.epsilon))
    return out


def pass_one(
    clip: AudioClip,
    geom: MicArrayGeometry,
    cfg: PipelineConfig,
    threads: int = 1,
    key: str = "",
) -> PassOneResult:
    """Compute spectra, pair correlations and map peaks for every frame."""
    timestamps = plan_timestamps(clip, cfg)
    fs = clip.sample_rate
    max_lags = [
        pair_max_lag(geom.pair_distance(p), fs, cfg.speed_of_sound)
        for p in geom.pairs
    ]
    grid = cfg.make_grid()

    def correlate(t: float):
        return _frame_correlations(clip, geom, cfg, t, max_lags)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_frame = list(pool.map(correlate, timestamps))
    else:
        per_frame = [correlate(t) for t in timestamps]
    kept = [k for k, c in enumerate(per_frame) if c is not None]
    timestamps = timestamps[kept]
    per_frame = [per_frame[k] for k in kept]
    if not per_frame:
        raise InputError("every requested frame fell outside the clip")
    correlations = [
        np.stack([frame[m] for frame in per_frame])
        for m in range(len(geom.pairs))
    ]

    # map stage, timed: lookup build plus frame evaluation
    t_start = time.perf_counter()
    if geom.moving:
        # per-frame lookups; cannot batch across frames
        def evaluate_frame(k: int) -> GcfFrame:
            table = build_tdoa_lookup(
                grid, geom, fs, cfg.speed_of_sound,
                mic_positions=geom.mic_positions_at(timestamps[k]),
                max_lags=max_lags,
            )
            return gcf_frame(per_frame[k], table, grid, timestamp=timestamps[k])

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                peaks = list(pool.map(evaluate_frame, range(len(per_frame))))
        else:
            peaks = [evaluate_frame(k) for k in range(len(per_frame))]
    else:
        lookup = build_tdoa_lookup(grid, geom, fs, cfg.speed_of_sound,
                                   max_lags=max_lags)

        def evaluate_chunk(bounds: tuple[int, int]) -> list[GcfFrame]:
            lo, hi = bounds
            return gcf_peaks([c[lo:hi] for c in correlations], lookup, grid,
                             timestamps[lo:hi])

        if threads > 1:
            edges = np.linspace(0, len(per_frame), threads + 1, dtype=int)
            chunks = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])
                      if b > a]
            with ThreadPoolExecutor(max_workers=threads) as pool:
                peaks = [f for part in pool.map(evaluate_chunk, chunks)
                         for f in part]
        else:
            peaks = evaluate_chunk((0, len(per_frame)))
    gcf_seconds = time.perf_counter() - t_start

    gamma = max(p.peak_value for p in peaks)
    return PassOneResult(
        timestamps=timestamps,
        correlations=correlations,
        max_lags=np.asarray(max_lags),
        peaks=peaks,
        gamma=gamma,
        gcf_seconds=gcf_seconds,
        key=key,
    )


def cache_key(cfg: PipelineConfig, geom: MicArrayGeometry, audio_path: str | Path | None) -> str:
    digest = hashlib.sha256()
    digest.update(cfg.to_json().encode())
    digest.update(repr(geom.to_dict()).encode())
    if audio_path is not None:
        digest.update(Path(audio_path).read_bytes())
    return digest.hexdigest()


def save_pass_one(path: str | Path, result: PassOneResult) -> None:
    arrays = {
        "timestamps": result.timestamps,
        "max_lags": result.max_lags,
        "gamma": np.array(result.gamma),
        "peak_positions": np.stack([p.peak_position for p in result.peaks]),
        "peak_values": result.peak_values,
        "peak_indices": np.array([p.peak_index for p in result.peaks]),
        "key": np.frombuffer(result.key.encode(), dtype=np.uint8),
    }
    for m, corr in enumerate(result.correlations):
        arrays[f"corr_{m}"] = corr
    with open(path, "wb") as fh:     # np.savez would append .npz to bare names
        np.savez(fh, **arrays)


def load_pass_one(path: str | Path) -> PassOneResult:
    path = Path(path)
    if not path.exists():
        raise InputError(f"pass-one cache not found: {path}")
    try:
        return _read_pass_one(path)
    except (OSError, EOFError, ValueError, KeyError) as exc:
        raise InputError(f"unreadable pass-one cache {path}: {exc}") from exc


def _read_pass_one(path: Path) -> PassOneResult:
    with np.load(path) as data:
        n_pairs = len(data["max_lags"])
        correlations = [data[f"corr_{m}"] for m in range(n_pairs)]
        timestamps = data["timestamps"]
        positions = data["peak_positions"]
        values = data["peak_values"]
        indices = data["peak_indices"]
        peaks = [
            GcfFrame(timestamp=float(t), peak_position=positions[k],
                     peak_value=float(values[k]), peak_index=int(indices[k]))
            for k, t in enumerate(timestamps)
        ]
        return PassOneResult(
            timestamps=timestamps,
            correlations=correlations,
            max_lags=data["max_lags"],
            peaks=peaks,
            gamma=float(data["gamma"]),
            gcf_seconds=0.0,
            key=bytes(data["key"]).decode(),
        )


@dataclass
class StaticResult:
    position: np.ndarray
    peaks: list[GcfFrame]
    gamma: float
    warnings: list[str]
    gcf_seconds: float


def run_static(
    cfg: PipelineConfig,
    clip: AudioClip,
    geom: MicArrayGeometry,
    threads: int = 1,
) -> StaticResult:
    """Locate a static source: map peaks per frame, then their mode."""
    result = pass_one(clip, geom, cfg, threads=threads)
    warnings = []
    if result.gamma < LOW_CONFIDENCE_GAMMA:
        warnings.append(
            f"low confidence: best map peak {result.gamma:.2e} is indistinguishable"
            " from silence"
        )
    return StaticResult(
        position=static_estimate(result.peaks),
        peaks=result.peaks,
        gamma=result.gamma,
        warnings=warnings,
        gcf_seconds=result.gcf_seconds,
    )


@dataclass
class TrackingResult:
    trajectory: Trajectory            # corrected and smoothed
    raw_trajectory: Trajectory        # particle filter output
    peaks: list[GcfFrame]
    gamma: float
    decision: TurningDecision | None
    smoothing_converged: bool
    report: EvalReport | None
    warnings: list[str]
    gcf_seconds: float


def run_tracking(
    cfg: PipelineConfig,
    clip: AudioClip,
    geom: MicArrayGeometry,
    truth: Trajectory | None = None,
    active_timestamps: np.ndarray | None = None,
    threads: int = 1,
    cache_path: str | Path | None = None,
    audio_path: str | Path | None = None,
) -> TrackingResult:
    """Track a moving source through the full two-pass pipeline.

    Pass-one artifacts are always written to cache_path (a temporary file
    next to nothing in particular when omitted) and reloaded before pass two,
    so a rerun with an existing, matching cache skips the heavy pass.
    """
    key = cache_key(cfg, geom, audio_path)
    loaded: PassOneResult | None = None
    if cache_path is not None and Path(cache_path).exists():
        try:
            candidate = load_pass_one(cache_path)
        except InputError as exc:
            logger.warning("ignoring cache: %s", exc)
        else:
            if candidate.key == key:
                logger.info("reusing pass-one cache %s", cache_path)
                loaded = candidate
    if loaded is None:
        computed = pass_one(clip, geom, cfg, threads=threads, key=key)
        if cache_path is None:
            cache_path = Path(str(audio_path) + ".pass1.npz") if audio_path \
                else None
        if cache_path is not None:
            save_pass_one(cache_path, computed)
            loaded = load_pass_one(cache_path)
            loaded.gcf_seconds = computed.gcf_seconds
        else:
            loaded = computed

    warnings = []
    tracking_gamma = loaded.gamma
    if loaded.gamma < LOW_CONFIDENCE_GAMMA:
        warnings.append(
            f"low confidence: best map peak {loaded.gamma:.2e};"
            " the whole recording looks silent"
        )
        # surrogate so the filter coasts in the low-confidence branch
        # instead of rejecting the degenerate recording-wide maximum
        tracking_gamma = 1.0

    grid = cfg.make_grid()
    fs = clip.sample_rate
    lookup_cache: dict[int, TdoaLookup] = {}

    def map_provider(k: int) -> np.ndarray:
        if geom.moving:
            table = build_tdoa_lookup(
                grid, geom, fs, cfg.speed_of_sound,
                mic_positions=geom.mic_positions_at(float(loaded.timestamps[k])),
                max_lags=loaded.max_lags,
            )
        else:
            if 0 not in lookup_cache:
                lookup_cache[0] = build_tdoa_lookup(
                    grid, geom, fs, cfg.speed_of_sound, max_lags=loaded.max_lags
                )
            table = lookup_cache[0]
        corrs = [loaded.correlations[m][k] for m in range(len(loaded.max_lags))]
        return gcf_frame(corrs, table, grid,
                         timestamp=float(loaded.timestamps[k]),
                         return_map=True).map_values

    raw = track(loaded.peaks, cfg.tracker_config(grid), tracking_gamma,
                map_provider=map_provider, seed=cfg.seed)

    decision = None
    corrected = raw
    if geom.planar:
        t0 = max(1, int(round(cfg.t0_fraction * len(loaded.peaks))))
        if 2 * t0 < len(loaded.peaks):
            decision = detect_turning(loaded.peak_values, t0=t0, kappa=cfg.kappa)
            corrected = apply_correction(raw, decision)
        else:
            warnings.append("recording too short for front-back detection")

    smoothed = corrected
    converged = True
    if len(corrected) >= 4:
        smooth = smooth_outliers(corrected, cfg.v_max, cfg.max_smooth_iters)
        smoothed = smooth.trajectory
        converged = smooth.converged
        if not converged:
            warnings.append(
                f"outlier smoothing did not converge in {cfg.max_smooth_iters} iterations"
            )

    report = None
    if truth is not None:
        if active_timestamps is None:
            active_timestamps = truth.timestamps
        report = evaluate(smoothed, truth, active_timestamps)

    return TrackingResult(
        trajectory=smoothed,
        raw_trajectory=raw,
        peaks=loaded.peaks,
        gamma=loaded.gamma,
        decision=decision,
        smoothing_converged=converged,
        report=report,
        warnings=warnings,
        gcf_seconds=loaded.gcf_seconds,
    )


def map_slice(
    cfg: PipelineConfig,
    clip: AudioClip,
    geom: MicArrayGeometry,
    frame_index: int,
    z: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full-map slice (x, y, value) of one frame at the z plane nearest z.

    Returns (xs, ys, values) with values shaped (len(ys), len(xs)).
    """
    timestamps = plan_timestamps(clip, cfg)
    if not 0 <= frame_index < len(timestamps):
        raise InputError(
            f"frame index {frame_index} outside 0..{len(timestamps) - 1}"
        )
    fs = clip.sample_rate
    max_lags = [
        pair_max_lag(geom.pair_distance(p), fs, cfg.speed_of_sound)
        for p in geom.pairs
    ]
    t = float(timestamps[frame_index])
    corrs = _frame_correlations(clip, geom, cfg, t, max_lags)
    if corrs is None:
        raise InputError(f"frame {frame_index} fell outside the clip")
    grid = cfg.make_grid()
    mic_positions = geom.mic_positions_at(t) if geom.moving else None
    lookup = build_tdoa_lookup(grid, geom, fs, cfg.speed_of_sound,
                               mic_positions=mic_positions, max_lags=max_lags)
    frame = gcf_frame(corrs, lookup, grid, timestamp=t, return_map=True)
    nx, ny, nz = grid.shape
    volume = frame.map_values.reshape(nz, ny, nx)
    kz = int(np.clip(np.rint((z - grid.axes[2][0]) / grid.step), 0, nz - 1))
    return grid.axes[0], grid.axes[1], volume[kz]
