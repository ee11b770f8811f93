import json

import numpy as np
import pytest

from gcftrack.cli import main
from gcftrack.config import PipelineConfig
from gcftrack.trajectory import read_trajectory_csv
from scene_util import mini_geometry


def write_scene(tmp_path, knots, duration=2.0, snr_db=25.0, seed=7,
                signal="white_noise"):
    scene = {
        "geometry": mini_geometry().to_dict(),
        "trajectory": [[t, *map(float, p)] for t, p in knots],
        "signal": signal,
        "snr_db": snr_db,
        "duration": duration,
        "seed": seed,
        "sample_rate": 48000.0,
    }
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(scene))
    return path


def write_config(tmp_path, **kwargs):
    defaults = dict(
        mode="tracking",
        window_length=4096,
        output_rate=10.0,
        grid_x=(-1.0, 1.0),
        grid_y=(0.5, 2.5),
        grid_z=(1.3, 1.7),
        grid_step=0.05,
        boundary_trim_s=0.0,
        seed=3,
    )
    defaults.update(kwargs)
    path = tmp_path / "config.json"
    PipelineConfig(**defaults).save(path)
    return path


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("cli_scene")
    scene = write_scene(
        tmp_path,
        [(0.0, (-0.4, 1.5, 1.5)), (2.0, (0.4, 1.5, 1.5))],
    )
    out_dir = tmp_path / "sim"
    assert main(["simulate", "--scene", str(scene), "--out-dir", str(out_dir)]) == 0
    return out_dir


def test_simulate_outputs(sim_dir):
    for name in ("audio.wav", "truth.csv", "activity.csv", "geometry.json"):
        assert (sim_dir / name).exists(), name
    header = (sim_dir / "truth.csv").read_text().splitlines()[0]
    assert header == "timestamp_s,x_m,y_m,z_m,active"


def test_track_with_report_and_figures(sim_dir, tmp_path):
    cfg = write_config(tmp_path)
    traj_csv = tmp_path / "traj.csv"
    report = tmp_path / "report.json"
    ratios = tmp_path / "ratios.csv"
    code = main([
        "track",
        "--audio", str(sim_dir / "audio.wav"),
        "--geometry", str(sim_dir / "geometry.json"),
        "--config", str(cfg),
        "--out", str(traj_csv),
        "--truth", str(sim_dir / "truth.csv"),
        "--activity", str(sim_dir / "activity.csv"),
        "--report", str(report),
        "--ratio-out", str(ratios),
    ])
    assert code == 0
    traj = read_trajectory_csv(traj_csv)
    assert len(traj) == 19    # 2.0 s clip, 10 Hz lattice, half-window margins

    payload = json.loads(report.read_text())
    assert payload["evaluation"]["mae_3d_m"] < 0.3
    assert payload["front_back"]["kind"] == "none"
    assert payload["smoothing_converged"] is True

    assert ratios.exists()
    assert (tmp_path / "report_trajectory.png").stat().st_size > 1000
    assert (tmp_path / "report_ratios.png").stat().st_size > 1000
    # pass-one cache written next to the audio by default
    assert (sim_dir / "audio.wav.pass1.npz").exists()


def test_track_no_figures(sim_dir, tmp_path):
    cfg = write_config(tmp_path)
    report = tmp_path / "rep.json"
    code = main([
        "track",
        "--audio", str(sim_dir / "audio.wav"),
        "--geometry", str(sim_dir / "geometry.json"),
        "--config", str(cfg),
        "--out", str(tmp_path / "t.csv"),
        "--report", str(report),
        "--no-figures",
        "--cache", str(tmp_path / "cache.npz"),
    ])
    assert code == 0
    assert report.exists()
    assert not (tmp_path / "rep_trajectory.png").exists()


def test_localize_static_source(tmp_path):
    scene = write_scene(tmp_path, [(0.0, (0.25, 1.75, 1.55))], duration=1.2,
                        snr_db=30.0, seed=9)
    out_dir = tmp_path / "sim"
    assert main(["simulate", "--scene", str(scene), "--out-dir", str(out_dir)]) == 0
    cfg = write_config(tmp_path, mode="static", window_length=8192)
    est = tmp_path / "est.json"
    code = main([
        "localize",
        "--audio", str(out_dir / "audio.wav"),
        "--geometry", str(out_dir / "geometry.json"),
        "--config", str(cfg),
        "--out", str(est),
    ])
    assert code == 0
    payload = json.loads(est.read_text())
    assert np.linalg.norm(np.array(payload["position_m"]) - [0.25, 1.75, 1.55]) < 0.06
    assert payload["warnings"] == []
    assert "azimuth_deg" in payload


def test_localize_silence_exits_degenerate(tmp_path):
    from scipy.io import wavfile
    silent = tmp_path / "silent.wav"
    wavfile.write(silent, 48000, np.zeros((48000, 7), dtype=np.float32))
    geom_path = tmp_path / "geom.json"
    mini_geometry().save(geom_path)
    cfg = write_config(tmp_path, mode="static")
    code = main([
        "localize",
        "--audio", str(silent),
        "--geometry", str(geom_path),
        "--config", str(cfg),
        "--out", str(tmp_path / "est.json"),
    ])
    assert code == 3


def test_dump_map(sim_dir, tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "slice.csv"
    code = main([
        "dump-map",
        "--audio", str(sim_dir / "audio.wav"),
        "--geometry", str(sim_dir / "geometry.json"),
        "--config", str(cfg),
        "--frame-index", "3",
        "--z", "1.5",
        "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x_m,y_m,value"
    assert len(lines) == 1 + 41 * 41
    assert out.with_suffix(".png").stat().st_size > 1000


def test_missing_audio_is_bad_input(tmp_path):
    geom_path = tmp_path / "geom.json"
    mini_geometry().save(geom_path)
    code = main([
        "localize",
        "--audio", str(tmp_path / "nope.wav"),
        "--geometry", str(geom_path),
        "--out", str(tmp_path / "est.json"),
    ])
    assert code == 2


def test_malformed_scene_is_bad_input(tmp_path):
    scene = tmp_path / "scene.json"
    scene.write_text("{\"duration\": 1.0}")
    code = main(["simulate", "--scene", str(scene), "--out-dir",
                 str(tmp_path / "out")])
    assert code == 2


def test_track_seed_override_changes_particles(sim_dir, tmp_path):
    cfg = write_config(tmp_path)
    outs = []
    for seed in ("11", "12"):
        out = tmp_path / f"traj_{seed}.csv"
        code = main([
            "track",
            "--audio", str(sim_dir / "audio.wav"),
            "--geometry", str(sim_dir / "geometry.json"),
            "--config", str(cfg),
            "--out", str(out),
            "--seed", seed,
            "--cache", str(tmp_path / f"c{seed}.npz"),
        ])
        assert code == 0
        outs.append(read_trajectory_csv(out))
    assert not np.array_equal(outs[0].positions, outs[1].positions)
