"""Synthetic acoustic scene renderer used as the ground-truth oracle.

Free-field propagation only: each microphone receives the source signal
delayed by distance/c (windowed-sinc fractional delay), scaled by 1/distance,
optionally attenuated when the source is behind the array plane (y < 0), plus
white Gaussian noise at a requested SNR.  No room reverberation; that is a
documented extension point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, load_audio
from .errors import InputError
from .geometry import MicArrayGeometry, geometry_from_dict, load_geometry, planar_array_geometry
from .trajectory import Trajectory

_MIN_DISTANCE = 0.1        # m, clamp for the 1/r gain
_SINC_TAPS = 31
_ENVELOPE_HZ = 4.0         # syllable-rate amplitude modulation
_POSITION_BOUND = 100.0    # m, sanity limit on trajectory coordinates


@dataclass
class SceneSpec:
    """Description of a synthetic scene.

    Attributes:
        geometry: microphone array (rendered as static).
        source_trajectory: (time_s, xyz) knots; the source moves piecewise
            linearly between them.  A single knot means a static source.
        source_signal: "white_noise", "speech" (amplitude-modulated noise
            with silence gaps) or a path to a mono WAV file.
        snr_db: SNR of the additive noise measured against the loudest
            channel; None disables noise.
        back_attenuation: linear gain in (0, 1] applied while the source is
            behind the array plane (y < 0).
        c: speed of sound, m/s.
        duration: seconds.
        seed: RNG seed for signal and noise.
    """

    geometry: MicArrayGeometry
    source_trajectory: list[tuple[float, np.ndarray]]
    source_signal: str = "white_noise"
    snr_db: float | None = 30.0
    back_attenuation: float = 1.0
    c: float = 343.0
    duration: float = 4.0
    seed: int = 0
    sample_rate: float = 48000.0

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise InputError("scene duration must be positive")
        if not 0 < self.back_attenuation <= 1:
            raise InputError("back_attenuation must be in (0, 1]")
        knots = [(float(t), np.asarray(p, dtype=float)) for t, p in self.source_trajectory]
        if not knots:
            raise InputError("source trajectory is empty")
        times = [t for t, _ in knots]
        if sorted(times) != times:
            raise InputError("trajectory knots must be time-sorted")
        if len(knots) > 1 and (times[0] > 0.0 or times[-1] < self.duration):
            raise InputError("trajectory knots must cover [0, duration]")
        for _, p in knots:
            if np.any(np.abs(p) > _POSITION_BOUND):
                raise InputError(f"trajectory point {p} outside plausible bounds")
        self.source_trajectory = knots


def _positions_at(knots: list[tuple[float, np.ndarray]], t: np.ndarray) -> np.ndarray:
    if len(knots) == 1:
        return np.tile(knots[0][1], (len(t), 1))
    kt = np.array([k[0] for k in knots])
    kp = np.stack([k[1] for k in knots])
    return np.column_stack([np.interp(t, kt, kp[:, axis]) for axis in range(3)])


def _speech_envelope(n: int, sample_rate: float, rng: np.random.Generator
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Raised-cosine syllable modulation gated by talk/pause spans.

    Returns (envelope, active) where active marks the talk spans.
    """
    t = np.arange(n) / sample_rate
    carrier = 0.5 * (1.0 - np.cos(2.0 * np.pi * _ENVELOPE_HZ * t))
    active = np.zeros(n, dtype=bool)
    cursor = 0.0
    duration = n / sample_rate
    while cursor < duration:
        talk = rng.uniform(0.8, 2.0)
        lo = int(cursor * sample_rate)
        hi = min(int((cursor + talk) * sample_rate), n)
        active[lo:hi] = True
        cursor += talk + rng.uniform(0.3, 0.8)
    return carrier * active, active


def _source_signal(spec: SceneSpec, n: int, rng: np.random.Generator
                   ) -> tuple[np.ndarray, np.ndarray]:
    kind = spec.source_signal
    if kind == "white_noise":
        return rng.standard_normal(n), np.ones(n, dtype=bool)
    if kind == "speech":
        envelope, active = _speech_envelope(n, spec.sample_rate, rng)
        return rng.standard_normal(n) * envelope, active
    clip = load_audio(kind)
    if clip.sample_rate != spec.sample_rate:
        raise InputError(
            f"source file rate {clip.sample_rate} != scene rate {spec.sample_rate}"
            " (resampling is out of scope)"
        )
    signal = clip.samples[0]
    if len(signal) < n:
        signal = np.pad(signal, (0, n - len(signal)))
    return signal[:n], np.ones(n, dtype=bool)


def _fractional_read(src: np.ndarray, read_pos: np.ndarray) -> np.ndarray:
    """Evaluate src at fractional sample positions with a windowed sinc.

    Positions outside the source read as zero, so no energy appears before
    the first arrival (beyond the interpolation kernel's half-width).
    """
    half = _SINC_TAPS // 2
    out = np.empty(len(read_pos))
    offsets = np.arange(-half, half + 1)
    chunk = 1 << 17
    for s in range(0, len(read_pos), chunk):
        rp = read_pos[s:s + chunk]
        base = np.rint(rp).astype(np.int64)     # taps centered on nearest sample
        idx = base[:, None] + offsets[None, :]
        u = rp[:, None] - idx
        taps = np.sinc(u) * (0.5 + 0.5 * np.cos(np.pi * u / (half + 1)))
        ok = (idx >= 0) & (idx < len(src))
        vals = np.where(ok, src[np.clip(idx, 0, len(src) - 1)], 0.0)
        out[s:s + chunk] = np.einsum("ij,ij->i", vals, taps)
    return out


def _delayed_constant(src: np.ndarray, delay_samples: float) -> np.ndarray:
    """src delayed by a constant (fractional) number of samples.

    A constant delay means one fixed windowed-sinc kernel, so the general
    per-sample gather collapses to a convolution.
    """
    half = _SINC_TAPS // 2
    m_lo = int(np.rint(delay_samples)) - half       # same taps as the general path
    u = delay_samples - np.arange(m_lo, m_lo + _SINC_TAPS)
    kernel = np.sinc(u) * (0.5 + 0.5 * np.cos(np.pi * u / (half + 1)))
    conv = np.convolve(src, kernel)
    n = len(src)
    out = np.zeros(n)
    k_start = max(0, m_lo)
    out[k_start:] = conv[k_start - m_lo:n - m_lo]
    return out


def render(spec: SceneSpec, sample_rate: float | None = None,
           truth_rate: float = 100.0
           ) -> tuple[AudioClip, Trajectory, np.ndarray]:
    """Render a scene to multichannel audio plus ground truth.

    Returns:
        (clip, truth, active): the audio, the source trajectory sampled at
        truth_rate, and per-truth-entry voice-activity flags.
    """
    fs = float(sample_rate if sample_rate is not None else spec.sample_rate)
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration * fs))
    sample_times = np.arange(n) / fs

    src, active_signal = _source_signal(spec, n, rng)
    src_pos = _positions_at(spec.source_trajectory, sample_times)
    back_gain = np.where(src_pos[:, 1] < 0.0, spec.back_attenuation, 1.0)

    mics = spec.geometry.mic_positions
    samples = np.empty((len(mics), n))
    sample_index = np.arange(n, dtype=float)
    static_source = len(spec.source_trajectory) == 1
    for ch, mic in enumerate(mics):
        dist = np.linalg.norm(src_pos - mic, axis=1)
        if static_source:
            delayed = _delayed_constant(src, float(dist[0]) / spec.c * fs)
        else:
            delayed = _fractional_read(src, sample_index - dist / spec.c * fs)
        samples[ch] = delayed * back_gain / np.maximum(dist, _MIN_DISTANCE)

    if spec.snr_db is not None and np.isfinite(spec.snr_db):
        loudest = np.max(np.mean(samples ** 2, axis=1))
        noise_std = float(np.sqrt(loudest * 10.0 ** (-spec.snr_db / 10.0)))
        samples += rng.normal(0.0, noise_std, samples.shape)

    truth_times = np.arange(0.0, spec.duration, 1.0 / truth_rate)
    truth = Trajectory(truth_times, _positions_at(spec.source_trajectory, truth_times))
    truth_sample = np.minimum((truth_times * fs).astype(int), n - 1)
    active = active_signal[truth_sample]
    return AudioClip(samples=samples, sample_rate=fs), truth, active


def scene_from_dict(data: dict, base_dir: Path | None = None) -> SceneSpec:
    """Build a SceneSpec from a parsed scene JSON object.

    The geometry may be inline (object), a file path, or the string
    "builtin" for the bundled planar array.
    """
    base = base_dir or Path(".")
    geo = data.get("geometry", "builtin")
    if isinstance(geo, dict):
        geometry = geometry_from_dict(geo)
    elif geo == "builtin":
        geometry = planar_array_geometry()
    else:
        path = Path(geo)
        geometry = load_geometry(path if path.is_absolute() else base / path)
    try:
        knots = [(float(row[0]), np.asarray(row[1:4], dtype=float))
                 for row in data["trajectory"]]
        spec = SceneSpec(
            geometry=geometry,
            source_trajectory=knots,
            source_signal=str(data.get("signal", "white_noise")),
            snr_db=data.get("snr_db", 30.0),
            back_attenuation=float(data.get("back_attenuation", 1.0)),
            c=float(data.get("c", 343.0)),
            duration=float(data["duration"]),
            seed=int(data.get("seed", 0)),
            sample_rate=float(data.get("sample_rate", 48000.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed scene description: {exc}") from exc
    return spec


def load_scene(path: str | Path) -> SceneSpec:
    path = Path(path)
    if not path.exists():
        raise InputError(f"scene file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"scene file is not valid JSON: {exc}") from exc
    return scene_from_dict(data, base_dir=path.parent)
