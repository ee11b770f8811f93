"""Pipeline configuration with JSON serialization.

Defaults follow the parameter set the localization approach was tuned with:
long analysis windows for a static source, short ones for a moving speaker,
a 2 cm search grid, and the particle-filter / front-back / smoothing
constants.  `boundary_trim_s` defaults to 650 frames at the default output
rate; recordings shorter than twice the trim yield no frames, so short clips
need a smaller value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InputError
from .gcf import Grid3D
from .tracking import TrackerConfig

MODE_STATIC = "static"
MODE_TRACKING = "tracking"
DEFAULT_WINDOW = {MODE_STATIC: 2 ** 14, MODE_TRACKING: 2 ** 12}
DEFAULT_OUTPUT_RATE = 10.0
DEFAULT_TRIM_FRAMES = 650


@dataclass
class PipelineConfig:
    mode: str = MODE_TRACKING
    window_length: int | None = None            # resolved from mode when None
    window_kind: str = "blackman"
    output_rate: float = DEFAULT_OUTPUT_RATE
    grid_x: tuple[float, float] = (-3.0, 3.0)
    grid_y: tuple[float, float] = (-0.1, 4.0)
    grid_z: tuple[float, float] = (1.3, 1.75)
    grid_step: float = 0.02
    n_particles: int = 100
    process_noise: tuple[float, float, float] = (0.1, 0.1, 0.005)
    sigma: float = 0.2
    alpha: float = 0.2
    beta: float = 0.1
    t0_fraction: float = 0.1
    kappa: float = 1.9
    v_max: float = 2.0
    max_smooth_iters: int = 15
    boundary_trim_s: float = field(default=None)  # type: ignore[assignment]
    speed_of_sound: float = 343.0
    epsilon: float = 1e-12
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in (MODE_STATIC, MODE_TRACKING):
            raise InputError(f"mode must be 'static' or 'tracking', got {self.mode!r}")
        if self.output_rate <= 0:
            raise InputError("output_rate must be positive")
        if self.window_length is None:
            self.window_length = DEFAULT_WINDOW[self.mode]
        if self.boundary_trim_s is None:
            self.boundary_trim_s = DEFAULT_TRIM_FRAMES / self.output_rate
        if self.window_length <= 0 or self.window_length & (self.window_length - 1):
            raise InputError("window_length must be a power of two")
        positives = {
            "output_rate": self.output_rate,
            "grid_step": self.grid_step,
            "sigma": self.sigma,
            "kappa": self.kappa,
            "v_max": self.v_max,
            "speed_of_sound": self.speed_of_sound,
            "epsilon": self.epsilon,
            "t0_fraction": self.t0_fraction,
        }
        for name, value in positives.items():
            if value <= 0:
                raise InputError(f"{name} must be positive")
        if self.boundary_trim_s < 0:
            raise InputError("boundary_trim_s cannot be negative")

    def make_grid(self) -> Grid3D:
        return Grid3D(tuple(self.grid_x), tuple(self.grid_y),
                      tuple(self.grid_z), self.grid_step)

    def tracker_config(self, grid: Grid3D | None = None) -> TrackerConfig:
        return TrackerConfig(
            grid=grid if grid is not None else self.make_grid(),
            n_particles=self.n_particles,
            process_noise=tuple(self.process_noise),
            sigma=self.sigma,
            alpha=self.alpha,
            beta=self.beta,
        )

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "window_length": int(self.window_length),
            "window_kind": self.window_kind,
            "output_rate_hz": float(self.output_rate),
            "grid_x_m": [float(v) for v in self.grid_x],
            "grid_y_m": [float(v) for v in self.grid_y],
            "grid_z_m": [float(v) for v in self.grid_z],
            "grid_step_m": float(self.grid_step),
            "n_particles": int(self.n_particles),
            "process_noise_m2": [float(v) for v in self.process_noise],
            "sigma_m": float(self.sigma),
            "alpha": float(self.alpha),
            "beta": float(self.beta),
            "t0_fraction": float(self.t0_fraction),
            "kappa": float(self.kappa),
            "v_max_mps": float(self.v_max),
            "max_smooth_iters": int(self.max_smooth_iters),
            "boundary_trim_s": float(self.boundary_trim_s),
            "speed_of_sound_mps": float(self.speed_of_sound),
            "epsilon": float(self.epsilon),
            "seed": int(self.seed),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


_KEY_MAP = {
    "mode": "mode",
    "window_length": "window_length",
    "window_kind": "window_kind",
    "output_rate_hz": "output_rate",
    "grid_x_m": "grid_x",
    "grid_y_m": "grid_y",
    "grid_z_m": "grid_z",
    "grid_step_m": "grid_step",
    "n_particles": "n_particles",
    "process_noise_m2": "process_noise",
    "sigma_m": "sigma",
    "alpha": "alpha",
    "beta": "beta",
    "t0_fraction": "t0_fraction",
    "kappa": "kappa",
    "v_max_mps": "v_max",
    "max_smooth_iters": "max_smooth_iters",
    "boundary_trim_s": "boundary_trim_s",
    "speed_of_sound_mps": "speed_of_sound",
    "epsilon": "epsilon",
    "seed": "seed",
}
_TUPLE_FIELDS = {"grid_x", "grid_y", "grid_z", "process_noise"}


def config_from_dict(data: dict) -> PipelineConfig:
    kwargs = {}
    for key, value in data.items():
        if key not in _KEY_MAP:
            raise InputError(f"unknown config key {key!r}")
        name = _KEY_MAP[key]
        kwargs[name] = tuple(value) if name in _TUPLE_FIELDS else value
    return PipelineConfig(**kwargs)


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"config file is not valid JSON: {exc}") from exc
    return config_from_dict(data)
