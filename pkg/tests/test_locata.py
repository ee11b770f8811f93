import numpy as np
import pytest

from gcftrack.errors import InputError
from gcftrack.locata import import_recording, read_table
from gcftrack.trajectory import read_ground_truth_csv


def fake_recording(tmp_path, with_vad=True, with_mics=True):
    rec = tmp_path / "recording1"
    rec.mkdir()
    (rec / "audio_array_dicit.wav").write_bytes(b"RIFFfake")

    time_prefix = "year month day hour minute second"

    def rows(seconds, tail):
        lines = []
        for s, extra in zip(seconds, tail):
            lines.append(f"2018 8 10 12 0 {s:.3f} " + " ".join(f"{v:.6f}" for v in extra))
        return "\n".join(lines)

    seconds = np.arange(0.0, 1.0, 0.1)
    positions = np.column_stack([np.linspace(0.0, 1.0, 10),
                                 np.full(10, 2.0),
                                 np.full(10, 1.6)])
    (rec / "position_source_talker1.txt").write_text(
        f"{time_prefix} x y z\n" + rows(seconds, positions) + "\n")

    (rec / "required_time.txt").write_text(
        f"{time_prefix} valid\n" + rows(seconds, [[1.0]] * 10) + "\n")

    if with_vad:
        vad = [[1.0]] * 6 + [[0.0]] * 4
        (rec / "VAD_dicit_talker1.txt").write_text(
            f"{time_prefix} activity\n" + rows(seconds, vad) + "\n")

    if with_mics:
        mic_cols = " ".join(f"mic{k}_x mic{k}_y mic{k}_z" for k in (1, 2, 3))
        mic_positions = [-0.2, 0.0, 1.4, 0.0, 0.0, 1.4, 0.2, 0.0, 1.4]
        (rec / "position_array_dicit.txt").write_text(
            f"{time_prefix} {mic_cols}\n" + rows(seconds[:2], [mic_positions] * 2) + "\n")
    return rec


def test_import_produces_truth_activity_and_geometry(tmp_path):
    rec = fake_recording(tmp_path)
    out = tmp_path / "converted"
    produced = import_recording(rec, "dicit", out)
    assert produced["audio"].name == "audio_array_dicit.wav"

    truth, active = read_ground_truth_csv(produced["truth"])
    assert len(truth) == 10
    assert truth.timestamps[0] == pytest.approx(0.0)
    assert truth.timestamps[-1] == pytest.approx(0.9)
    assert np.allclose(truth.positions[:, 1], 2.0)
    assert active.sum() == 6

    geometry = produced["geometry"]
    assert geometry.exists()
    data = geometry.read_text()
    assert '"pairs"' in data


def test_azimuth_offset_rotates_truth(tmp_path):
    rec = fake_recording(tmp_path, with_vad=False, with_mics=False)
    out = tmp_path / "converted"
    produced = import_recording(rec, "dicit", out, azimuth_offset_deg=90.0)
    truth, active = read_ground_truth_csv(produced["truth"])
    assert active.all()
    # (x, 2.0) rotated +90 degrees about z becomes (-2.0, x)
    assert np.allclose(truth.positions[:, 0], -2.0, atol=1e-9)
    assert np.allclose(truth.positions[:, 1], np.linspace(0.0, 1.0, 10), atol=1e-9)


def test_missing_pieces_rejected(tmp_path):
    with pytest.raises(InputError):
        import_recording(tmp_path / "nowhere", "dicit", tmp_path / "out")
    empty = tmp_path / "empty_rec"
    empty.mkdir()
    with pytest.raises(InputError):
        import_recording(empty, "dicit", tmp_path / "out2")


def test_read_table_validates_width(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("a b c\n1 2\n")
    with pytest.raises(InputError):
        read_table(bad)
