"""3D sound source localization and tracking from microphone-array audio.

Pipeline: PHAT-whitened pair correlations -> global coherence field over a
3D grid -> per-frame peaks -> particle filter with a selective likelihood ->
front-back correction for planar arrays -> velocity-outlier smoothing ->
MAE evaluation.  A free-field scene simulator provides ground truth for
end-to-end verification.
"""

from .audio_io import AudioClip, FrameSeries, frame_and_transform, load_audio, save_audio
from .config import PipelineConfig, load_config
from .errors import GcfTrackError, InputError
from .front_back import TurningDecision, apply_correction, detect_turning, peak_averages
from .gcc_phat import GccFrame, correlation_at, gcc_phat, pair_max_lag
from .gcf import GcfFrame, Grid3D, TdoaLookup, build_tdoa_lookup, gcf_frame, static_estimate
from .geometry import MicArrayGeometry, load_geometry, planar_array_geometry
from .pipeline import run_static, run_tracking
from .simulate import SceneSpec, render
from .tracking import (
    ParticleSet,
    TrackerConfig,
    estimate,
    propagate,
    resample_sir,
    track,
    update_weights,
)
from .trajectory import EvalReport, Trajectory, evaluate, smooth_outliers, to_angles

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "EvalReport",
    "FrameSeries",
    "GccFrame",
    "GcfFrame",
    "GcfTrackError",
    "Grid3D",
    "InputError",
    "MicArrayGeometry",
    "ParticleSet",
    "PipelineConfig",
    "SceneSpec",
    "TdoaLookup",
    "TrackerConfig",
    "Trajectory",
    "TurningDecision",
    "apply_correction",
    "build_tdoa_lookup",
    "correlation_at",
    "detect_turning",
    "estimate",
    "evaluate",
    "frame_and_transform",
    "gcc_phat",
    "gcf_frame",
    "load_audio",
    "load_config",
    "load_geometry",
    "pair_max_lag",
    "peak_averages",
    "planar_array_geometry",
    "propagate",
    "render",
    "resample_sir",
    "run_static",
    "run_tracking",
    "save_audio",
    "smooth_outliers",
    "static_estimate",
    "to_angles",
    "track",
    "update_weights",
]
