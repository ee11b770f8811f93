"""Particle filter over per-frame acoustic-map peaks.

The likelihood is selective: frames whose map peak is strong (relative to the
recording-wide maximum) pull particles toward the peak with a Gaussian;
middling frames weight particles by the map value at their position; weak
frames leave all particles equally weighted so the filter coasts on its
prediction.  Resampling is systematic, every frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import GcfTrackError, InputError
from .gcf import GcfFrame, Grid3D
from .trajectory import Trajectory

BRANCH_PEAK = "peak"
BRANCH_MAP = "map"
BRANCH_UNIFORM = "uniform"


class WeightDegeneracyError(GcfTrackError):
    """All particle weights are zero."""


@dataclass
class TrackerConfig:
    """Particle filter parameters.

    Attributes:
        grid: search grid; bounds clamp the particles and its lattice is the
            lookup domain for map-branch weights.
        process_noise: per-axis variances (m^2) of the random-walk increment;
            the z entry is smaller than x/y because mouth height varies less
            than floor position.
        sigma: std (m) of the Gaussian likelihood around the map peak.
        alpha, beta: fractions of the recording-wide peak maximum separating
            the high-confidence / map / coasting likelihood branches.
    """

    grid: Grid3D
    n_particles: int = 100
    process_noise: tuple[float, float, float] = (0.1, 0.1, 0.005)
    sigma: float = 0.2
    alpha: float = 0.2
    beta: float = 0.1

    def __post_init__(self) -> None:
        if self.n_particles < 1:
            raise InputError("n_particles must be at least 1")
        if not (0 < self.beta < self.alpha <= 1):
            raise InputError("need alpha > beta > 0 (both at most 1)")
        if self.sigma <= 0 or any(v <= 0 for v in self.process_noise):
            raise InputError("sigma and process noise variances must be positive")


@dataclass
class ParticleSet:
    """Weighted 3D position hypotheses plus their RNG stream."""

    states: np.ndarray
    weights: np.ndarray
    rng: np.random.Generator
    seed: int
    degenerate: bool = False

    @property
    def n(self) -> int:
        return len(self.weights)


def init_particles(cfg: TrackerConfig, seed: int) -> ParticleSet:
    """Spread particles uniformly over the grid bounding box."""
    rng = np.random.default_rng(seed)
    states = rng.uniform(cfg.grid.lower, cfg.grid.upper,
                         size=(cfg.n_particles, 3))
    weights = np.full(cfg.n_particles, 1.0 / cfg.n_particles)
    return ParticleSet(states=states, weights=weights, rng=rng, seed=seed)


def propagate(particles: ParticleSet, process_noise: Sequence[float],
              grid: Grid3D) -> ParticleSet:
    """Random-walk step with per-axis Gaussian noise, clamped to the grid box."""
    std = np.sqrt(np.asarray(process_noise, dtype=float))
    moved = particles.states + particles.rng.normal(0.0, 1.0, particles.states.shape) * std
    return replace(particles, states=grid.clamp(moved))


def choose_branch(peak_value: float, gamma: float, alpha: float, beta: float) -> str:
    """Likelihood branch for a frame; depends only on the peak value and the
    recording-wide maximum."""
    if gamma <= 0:
        raise InputError("gamma must be positive")
    if peak_value >= alpha * gamma:
        return BRANCH_PEAK
    if peak_value >= beta * gamma:
        return BRANCH_MAP
    return BRANCH_UNIFORM


def update_weights(
    particles: ParticleSet,
    frame: GcfFrame,
    gamma: float,
    cfg: TrackerConfig,
    map_values: np.ndarray | Callable[[], np.ndarray] | None = None,
) -> ParticleSet:
    """Reweight particles with the selective likelihood and normalize.

    Args:
        map_values: full map for the frame (or a callable producing it);
            required only when the frame falls in the map branch.  Negative
            map values are floored at zero before normalization.
    """
    branch = choose_branch(frame.peak_value, gamma, cfg.alpha, cfg.beta)
    if branch == BRANCH_PEAK:
        dist = np.linalg.norm(particles.states - frame.peak_position, axis=1)
        weights = np.exp(-0.5 * (dist / cfg.sigma) ** 2) / (cfg.sigma * math.sqrt(2 * math.pi))
    elif branch == BRANCH_MAP:
        if map_values is None:
            raise InputError("map branch requires the frame's map values")
        values = map_values() if callable(map_values) else map_values
        weights = np.maximum(values[cfg.grid.nearest_indices(particles.states)], 0.0)
    else:
        weights = np.ones(particles.n)

    total = float(weights.sum())
    if total <= 0.0 or not np.isfinite(total):
        # coast on the prediction: equal weights, flagged for the caller
        return replace(particles,
                       weights=np.full(particles.n, 1.0 / particles.n),
                       degenerate=True)
    return replace(particles, weights=weights / total, degenerate=False)


def estimate(particles: ParticleSet) -> np.ndarray:
    """Weighted mean of the particle states."""
    total = float(particles.weights.sum())
    if total <= 0.0:
        raise WeightDegeneracyError("all particle weights are zero")
    return particles.states.T @ (particles.weights / total)


def systematic_indices(weights: np.ndarray, n_draws: int, offset: float) -> np.ndarray:
    """Indices selected by the systematic scheme: one draw per stratum
    [k/n, (k+1)/n), all sharing the same in-stratum offset."""
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if total <= 0.0:
        raise WeightDegeneracyError("cannot resample zero weights")
    positions = (offset + np.arange(n_draws)) / n_draws
    cumulative = np.cumsum(weights / total)
    cumulative[-1] = 1.0
    indices = np.searchsorted(cumulative, positions, side="right")
    return np.minimum(indices, len(weights) - 1)


def resample_sir(particles: ParticleSet, offset: float | None = None) -> ParticleSet:
    """Systematic resampling; output weights are uniform.

    Args:
        offset: the sampler's uniform draw in [0, 1); drawn from the particle
            RNG when omitted (exposed for deterministic tests).
    """
    if offset is None:
        offset = float(particles.rng.uniform())
    indices = systematic_indices(particles.weights, particles.n, offset)
    return replace(particles,
                   states=particles.states[indices],
                   weights=np.full(particles.n, 1.0 / particles.n),
                   degenerate=False)


def track(
    frames: Sequence[GcfFrame],
    cfg: TrackerConfig,
    gamma: float,
    map_provider: Callable[[int], np.ndarray] | None = None,
    seed: int = 0,
) -> Trajectory:
    """Run propagate / update / estimate / resample over the frame peaks.

    Args:
        frames: per-frame map peaks in time order.
        gamma: recording-wide maximum of the peak values (two-pass pipeline).
        map_provider: called with the frame index to obtain the full map when
            a frame needs the map branch.
    """
    if len(frames) == 0:
        raise InputError("no frames to track over")
    particles = init_particles(cfg, seed)
    estimates = np.empty((len(frames), 3))
    for k, frame in enumerate(frames):
        particles = propagate(particles, cfg.process_noise, cfg.grid)
        lazy_map = (lambda k=k: map_provider(k)) if map_provider is not None else None
        particles = update_weights(particles, frame, gamma, cfg, lazy_map)
        estimates[k] = estimate(particles)
        particles = resample_sir(particles)
    return Trajectory(
        timestamps=np.array([f.timestamp for f in frames]),
        positions=estimates,
    )
