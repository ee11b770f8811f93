"""Multichannel WAV ingestion and windowed spectral framing.

Frames are centered on caller-requested timestamps rather than laid out on a
fixed hop, so the output cadence is decoupled from the window length.  Frames
whose window would overrun the clip are dropped and reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import InputError

_WINDOWS = {
    "blackman": np.blackman,
    "hann": np.hanning,
    "rectangular": np.ones,
}

# Peak magnitude per integer sample format; 24-bit PCM arrives left-justified
# in int32, so the int32 divisor covers it too.
_INT_SCALE = {
    np.dtype(np.int16): 2.0 ** 15,
    np.dtype(np.int32): 2.0 ** 31,
    np.dtype(np.uint8): 2.0 ** 7,
}


@dataclass
class AudioClip:
    """Multichannel audio, samples within [-1, 1].

    Attributes:
        samples: (channels, n_samples) float array.
        sample_rate: Hz.
    """

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self) -> None:
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if self.sample_rate <= 0:
            raise InputError("sample_rate must be positive")

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate


def load_audio(path: str | Path) -> AudioClip:
    """Load a multichannel PCM WAV file and normalize samples to [-1, 1].

    Supports 16/24/32-bit integer and 32-bit float encodings.  Channel order
    is preserved.  Raises InputError for unreadable files, unsupported
    encodings and single-channel input.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"audio file not found: {path}")
    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise InputError(f"cannot read WAV file {path}: {exc}") from exc
    if data.ndim == 1:
        raise InputError(f"{path} is single-channel; at least 2 channels required")
    if data.dtype in _INT_SCALE:
        scale = _INT_SCALE[data.dtype]
        samples = data.astype(float)
        if data.dtype == np.dtype(np.uint8):
            samples -= 128.0
        samples /= scale
    elif np.issubdtype(data.dtype, np.floating):
        samples = data.astype(float)
    else:
        raise InputError(f"unsupported WAV sample format: {data.dtype}")
    return AudioClip(samples=samples.T, sample_rate=float(rate))


def save_audio(path: str | Path, clip: AudioClip) -> None:
    """Write a clip as 32-bit float WAV."""
    wavfile.write(Path(path), int(clip.sample_rate),
                  clip.samples.T.astype(np.float32))


def window_taper(window_kind: str, window_length: int) -> np.ndarray:
    try:
        return _WINDOWS[window_kind](window_length)
    except KeyError:
        raise InputError(
            f"unknown window kind {window_kind!r}; expected one of {sorted(_WINDOWS)}"
        ) from None


@dataclass
class FrameSeries:
    """One-sided complex spectra at a list of timestamps.

    Attributes:
        timestamps: (T,) seconds, strictly increasing.
        spectra: (T, channels, window_length // 2 + 1) complex array.
        dropped: requested timestamps whose window fell outside the clip.
    """

    timestamps: np.ndarray
    spectra: np.ndarray
    window_length: int
    window_kind: str
    sample_rate: float
    hop: int | None = None
    dropped: list[float] = field(default_factory=list)

    @property
    def n_frames(self) -> int:
        return len(self.timestamps)

    @property
    def n_channels(self) -> int:
        return self.spectra.shape[1]

    def frames(self):
        """Iterate (timestamp, per-channel spectrum) tuples."""
        return zip(self.timestamps, self.spectra)


def frame_and_transform(
    clip: AudioClip,
    window_length: int,
    timestamps: list[float] | np.ndarray,
    window_kind: str = "blackman",
) -> FrameSeries:
    """Window the clip around each timestamp and transform to spectra.

    Each frame is centered on its timestamp, tapered, then transformed to a
    one-sided spectrum.  Frames that would overrun the clip are dropped and
    listed in the result's `dropped` attribute.

    Args:
        clip: input audio.
        window_length: frame size in samples; must be a power of two.
        timestamps: requested frame centers, seconds, strictly increasing.
        window_kind: taper name ("blackman", "hann", "rectangular").
    """
    timestamps = np.asarray(timestamps, dtype=float)
    if timestamps.size == 0:
        raise InputError("timestamp list is empty")
    if np.any(np.diff(timestamps) <= 0):
        raise InputError("timestamps must be strictly increasing")
    if window_length <= 0 or window_length & (window_length - 1):
        raise InputError(f"window_length must be a power of two, got {window_length}")
    if window_length > clip.n_samples:
        raise InputError(
            f"window of {window_length} samples exceeds clip length {clip.n_samples}"
        )

    taper = window_taper(window_kind, window_length)
    half = window_length // 2
    centers = np.rint(timestamps * clip.sample_rate).astype(int)
    starts = centers - half
    ok = (starts >= 0) & (starts + window_length <= clip.n_samples)

    kept = np.flatnonzero(ok)
    spectra = np.empty(
        (len(kept), clip.channel_count, half + 1), dtype=complex
    )
    for out_row, k in enumerate(kept):
        s = starts[k]
        frame = clip.samples[:, s:s + window_length] * taper
        spectra[out_row] = np.fft.rfft(frame, axis=-1)

    hops = np.diff(centers)
    return FrameSeries(
        timestamps=timestamps[kept],
        spectra=spectra,
        window_length=window_length,
        window_kind=window_kind,
        sample_rate=clip.sample_rate,
        hop=int(np.median(hops)) if len(hops) else None,
        dropped=[float(t) for t in timestamps[~ok]],
    )
