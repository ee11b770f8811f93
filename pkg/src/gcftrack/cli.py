"""Command line interface.

Exit codes: 0 on success, 2 on bad input, 3 when the run completed but the
result is degenerate (warnings are printed to stderr).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import locata
from .audio_io import load_audio, save_audio
from .config import MODE_STATIC, MODE_TRACKING, PipelineConfig, load_config
from .errors import GcfTrackError, InputError
from .front_back import write_ratio_csv
from .geometry import load_geometry
from .pipeline import map_slice, run_static, run_tracking
from .simulate import load_scene, render
from .trajectory import (
    read_activity_csv,
    read_ground_truth_csv,
    to_angles,
    write_activity_csv,
    write_ground_truth_csv,
    write_trajectory_csv,
)

logger = logging.getLogger(__name__)


def _load_pipeline_inputs(args, default_mode: str):
    clip = load_audio(args.audio)
    geom = load_geometry(args.geometry)
    cfg = load_config(args.config) if args.config else PipelineConfig(mode=default_mode)
    return clip, geom, cfg


def _cmd_localize(args) -> int:
    clip, geom, cfg = _load_pipeline_inputs(args, MODE_STATIC)
    result = run_static(cfg, clip, geom, threads=args.threads)
    azimuth, elevation = to_angles(result.position)
    payload = {
        "position_m": [float(v) for v in result.position],
        "azimuth_deg": azimuth,
        "elevation_deg": elevation,
        "max_peak_value": result.gamma,
        "frame_count": len(result.peaks),
        "warnings": result.warnings,
    }
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    print(f"estimated position: {np.round(result.position, 4).tolist()}")
    for text in result.warnings:
        print(f"warning: {text}", file=sys.stderr)
    return 3 if result.warnings else 0


def _cmd_track(args) -> int:
    clip, geom, cfg = _load_pipeline_inputs(args, MODE_TRACKING)
    if args.seed is not None:
        cfg.seed = args.seed
    truth = active_ts = None
    if args.truth:
        truth, active_flags = read_ground_truth_csv(args.truth)
        if args.activity:
            act_times, act_flags = read_activity_csv(args.activity)
            active_ts = act_times[act_flags]
        elif active_flags is not None:
            active_ts = truth.timestamps[active_flags]
        else:
            active_ts = truth.timestamps

    result = run_tracking(
        cfg, clip, geom,
        truth=truth,
        active_timestamps=active_ts,
        threads=args.threads,
        cache_path=args.cache,
        audio_path=args.audio,
    )
    write_trajectory_csv(args.out, result.trajectory)
    print(f"wrote {len(result.trajectory)} estimates to {args.out}")

    if args.ratio_out and result.decision is not None:
        write_ratio_csv(args.ratio_out, result.trajectory.timestamps, result.decision)

    if args.report:
        payload = {
            "gamma": result.gamma,
            "frame_count": len(result.trajectory),
            "front_back": {
                "kind": result.decision.kind if result.decision else "skipped",
                "frame": result.decision.frame if result.decision else None,
            },
            "smoothing_converged": result.smoothing_converged,
            "warnings": result.warnings,
        }
        if result.report is not None:
            payload["evaluation"] = result.report.to_dict()
            print(result.report.format_table())
        Path(args.report).write_text(json.dumps(payload, indent=2) + "\n")
        if not args.no_figures:
            from . import plots
            stem = Path(args.report).with_suffix("")
            plots.save_trajectory_figure(f"{stem}_trajectory.png",
                                         result.trajectory, truth, geom)
            if result.decision is not None:
                plots.save_ratio_figure(
                    f"{stem}_ratios.png",
                    result.trajectory.timestamps,
                    np.array([p.peak_value for p in result.peaks]),
                    result.decision,
                    cfg.kappa,
                )
    for text in result.warnings:
        print(f"warning: {text}", file=sys.stderr)
    return 3 if result.warnings else 0


def _cmd_simulate(args) -> int:
    spec = load_scene(args.scene)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    clip, truth, active = render(spec)
    save_audio(out_dir / "audio.wav", clip)
    write_ground_truth_csv(out_dir / "truth.csv", truth, active)
    write_activity_csv(out_dir / "activity.csv", truth.timestamps, active)
    spec.geometry.save(out_dir / "geometry.json")
    print(
        f"rendered {clip.duration:.2f} s x {clip.channel_count} channels"
        f" at {clip.sample_rate:.0f} Hz into {out_dir}"
    )
    return 0


def _cmd_dump_map(args) -> int:
    clip, geom, cfg = _load_pipeline_inputs(args, MODE_TRACKING)
    xs, ys, values = map_slice(cfg, clip, geom, args.frame_index, args.z)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x_m", "y_m", "value"])
        for iy, y in enumerate(ys):
            for ix, x in enumerate(xs):
                writer.writerow([f"{x:.6f}", f"{y:.6f}", f"{values[iy, ix]:.9f}"])
    print(f"wrote {values.size} map values to {args.out}")
    if not args.no_figures:
        from . import plots
        png = Path(args.out).with_suffix(".png")
        plots.save_map_slice_figure(png, xs, ys, values, args.z, geom)
    return 0


def _cmd_import_locata(args) -> int:
    paths = locata.import_recording(
        Path(args.recording_dir), args.array_name, Path(args.out_dir),
        azimuth_offset_deg=args.azimuth_offset,
    )
    for label, path in paths.items():
        print(f"{label}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gcftrack",
        description="3D sound source localization and tracking from "
                    "microphone-array recordings.",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="enable info-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_pipeline_args(p, with_out=True):
        p.add_argument("--audio", required=True, help="multichannel WAV file")
        p.add_argument("--geometry", required=True, help="geometry JSON file")
        p.add_argument("--config", help="pipeline config JSON (defaults used when omitted)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for the per-frame pass")
        if with_out:
            p.add_argument("--out", required=True, help="output path")

    p = sub.add_parser("localize", help="estimate a static source position")
    add_pipeline_args(p)
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("track", help="track a moving source")
    add_pipeline_args(p)
    p.add_argument("--truth", help="ground-truth CSV for evaluation")
    p.add_argument("--activity", help="voice-activity CSV (timestamp_s,active)")
    p.add_argument("--report", help="write an evaluation/report JSON here")
    p.add_argument("--cache", help="pass-one cache file (reused when it matches)")
    p.add_argument("--ratio-out", help="write front-back ratio curves CSV here")
    p.add_argument("--seed", type=int, help="override the config RNG seed")
    p.add_argument("--no-figures", action="store_true",
                   help="skip rendering figures next to the report")
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("simulate", help="render a synthetic scene")
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("dump-map", help="dump one frame's map slice as CSV")
    add_pipeline_args(p)
    p.add_argument("--frame-index", type=int, required=True)
    p.add_argument("--z", type=float, required=True, help="slice height, m")
    p.add_argument("--no-figures", action="store_true",
                   help="skip rendering the heatmap PNG")
    p.set_defaults(func=_cmd_dump_map)

    p = sub.add_parser("import-locata",
                       help="convert a LOCATA-format recording directory")
    p.add_argument("--recording-dir", required=True)
    p.add_argument("--array-name", default="dicit")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--azimuth-offset", type=float, default=0.0,
                   help="degrees added to azimuth during conversion")
    p.set_defaults(func=_cmd_import_locata)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GcfTrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
