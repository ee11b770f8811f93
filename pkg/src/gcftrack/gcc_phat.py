"""Generalized cross correlation with phase transform for a mic pair.

Each cross-spectrum bin is normalized to unit magnitude before the inverse
transform, which whitens the correlation and sharpens the delay peak under
reverberation.  Lag convention: the correlation of (spec_a, spec_b) peaks at
+d when the signal behind spec_b is delayed by d samples relative to the one
behind spec_a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GcfTrackError, InputError

DEFAULT_EPSILON = 1e-12
SPEED_OF_SOUND = 343.0


class LagOutOfRange(GcfTrackError):
    """Requested TDOA falls outside the stored lag range."""


def pair_max_lag(distance_m: float, sample_rate: float,
                 c: float = SPEED_OF_SOUND, slack: int = 2) -> int:
    """Largest physically admissible lag for a pair, plus slack samples."""
    if distance_m <= 0:
        raise InputError("pair distance must be positive")
    return int(math.ceil(distance_m / c * sample_rate)) + slack


def gcc_phat(
    spec_a: np.ndarray,
    spec_b: np.ndarray,
    max_lag: int,
    epsilon: float = DEFAULT_EPSILON,
) -> np.ndarray:
    """PHAT-whitened cross correlation over integer lags [-max_lag, max_lag].

    Args:
        spec_a: one-sided complex spectrum of the reference channel.
        spec_b: one-sided complex spectrum of the delayed channel.
        max_lag: half-width of the returned lag range, samples.
        epsilon: cross-spectrum bins with magnitude below this contribute
            zero instead of being amplified by the whitening.

    Returns:
        (2 * max_lag + 1,) real correlation; index k holds lag k - max_lag.
    """
    spec_a = np.asarray(spec_a)
    spec_b = np.asarray(spec_b)
    if spec_a.shape != spec_b.shape:
        raise InputError(
            f"spectrum lengths differ: {spec_a.shape} vs {spec_b.shape}"
        )
    if epsilon <= 0:
        raise InputError("epsilon must be positive")
    nfft = 2 * (len(spec_a) - 1)
    if not 0 < max_lag < nfft // 2:
        raise InputError(f"max_lag must be within (0, {nfft // 2})")

    cross = spec_b * np.conj(spec_a)
    magnitude = np.abs(cross)
    whitened = np.zeros_like(cross)
    keep = magnitude >= epsilon
    whitened[keep] = cross[keep] / magnitude[keep]
    cc = np.fft.irfft(whitened, n=nfft)
    return np.concatenate((cc[-max_lag:], cc[:max_lag + 1]))


def correlation_at(correlation: np.ndarray, tau: float, sample_rate: float) -> float:
    """Correlation value at a possibly fractional TDOA, seconds.

    Linear interpolation between the two neighboring integer lags; raises
    LagOutOfRange when |tau| exceeds the stored range so the caller can clamp
    or discard the query point.
    """
    max_lag = (len(correlation) - 1) // 2
    x = tau * sample_rate
    if not -max_lag <= x <= max_lag:
        raise LagOutOfRange(
            f"tau of {x:.3f} samples outside stored range +-{max_lag}"
        )
    k = int(math.floor(x))
    if k == max_lag:
        return float(correlation[-1])
    frac = x - k
    lo = correlation[k + max_lag]
    hi = correlation[k + max_lag + 1]
    return float(lo + frac * (hi - lo))


@dataclass
class GccFrame:
    """Correlation of one pair at one frame, with its peak."""

    pair_index: int
    timestamp: float
    correlation: np.ndarray
    max_lag: int
    peak_lag: int
    peak_value: float

    @classmethod
    def from_spectra(
        cls,
        pair_index: int,
        timestamp: float,
        spec_a: np.ndarray,
        spec_b: np.ndarray,
        max_lag: int,
        epsilon: float = DEFAULT_EPSILON,
    ) -> "GccFrame":
        corr = gcc_phat(spec_a, spec_b, max_lag, epsilon)
        k = int(np.argmax(corr))
        return cls(
            pair_index=pair_index,
            timestamp=timestamp,
            correlation=corr,
            max_lag=max_lag,
            peak_lag=k - max_lag,
            peak_value=float(corr[k]),
        )
