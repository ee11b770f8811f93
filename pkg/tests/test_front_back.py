import numpy as np
import pytest

from gcftrack.errors import InputError
from gcftrack.front_back import (
    BACK_TO_FRONT,
    FRONT_TO_BACK,
    NONE,
    TurningDecision,
    apply_correction,
    detect_turning,
    gcf_ratios,
    peak_averages,
    write_ratio_csv,
)
from gcftrack.trajectory import Trajectory

STEP_DOWN_SMALL = np.array([2.0, 2, 2, 2, 1, 1, 1, 1])
STEP_DOWN_BIG = np.array([3.0, 3, 3, 3, 1, 1, 1, 1])


class TestPeakAverages:
    def test_constant_sequence(self):
        forward, backward = peak_averages(np.full(6, 4.2))
        assert np.allclose(forward, 4.2)
        assert np.allclose(backward, 4.2)

    def test_hand_computed_step(self):
        forward, backward = peak_averages(STEP_DOWN_SMALL)
        # 1-based position 4 is index 3
        assert forward[3] == pytest.approx(2.0)
        assert backward[3] == pytest.approx(1.2)

    def test_full_window_equals_global_mean(self):
        rng = np.random.default_rng(0)
        peaks = rng.uniform(0.1, 1.0, size=17)
        forward, backward = peak_averages(peaks)
        assert forward[-1] == pytest.approx(np.mean(peaks))
        assert backward[0] == pytest.approx(np.mean(peaks))

    def test_empty_raises(self):
        with pytest.raises(InputError):
            peak_averages(np.array([]))


class TestRatios:
    def test_reciprocal_product_is_one(self):
        rng = np.random.default_rng(1)
        peaks = rng.uniform(0.05, 1.0, size=40)
        fb, bf = gcf_ratios(peaks)
        assert np.nanmax(np.abs(fb * bf - 1.0)) < 1e-9

    def test_zero_tail_marked_undefined(self):
        fb, bf = gcf_ratios(np.array([1.0, 1.0, 0.0, 0.0]))
        assert np.isnan(fb[2]) and np.isnan(fb[3])
        assert not np.isnan(fb[0])


class TestDetectTurning:
    def test_small_step_stays_below_threshold(self):
        decision = detect_turning(STEP_DOWN_SMALL, t0=1, kappa=1.9)
        assert decision.kind == NONE
        assert decision.frame is None
        # the best forward/backward ratio is 9/5 at 1-based frame 5
        assert np.nanmax(decision.ratio_fb[1:6]) == pytest.approx(1.8)

    def test_big_step_detected_front_to_back(self):
        decision = detect_turning(STEP_DOWN_BIG, t0=1, kappa=1.9)
        assert decision.kind == FRONT_TO_BACK
        assert decision.frame == 4            # 1-based frame 5
        assert decision.ratio_fb[4] == pytest.approx(2.6)

    def test_constant_sequence_gives_none(self):
        decision = detect_turning(np.full(10, 0.7), t0=1, kappa=1.9)
        assert decision.kind == NONE

    def test_reversed_sequence_mirrors_decision(self):
        forward = detect_turning(STEP_DOWN_BIG, t0=1, kappa=1.9)
        backward = detect_turning(STEP_DOWN_BIG[::-1], t0=1, kappa=1.9)
        assert forward.kind == FRONT_TO_BACK
        assert backward.kind == BACK_TO_FRONT
        assert backward.frame == len(STEP_DOWN_BIG) - 1 - forward.frame

    def test_scaling_invariance(self):
        base = detect_turning(STEP_DOWN_BIG, t0=1, kappa=1.9)
        scaled = detect_turning(STEP_DOWN_BIG * 123.4, t0=1, kappa=1.9)
        assert scaled.kind == base.kind
        assert scaled.frame == base.frame
        assert np.allclose(scaled.ratio_fb, base.ratio_fb)

    def test_frame_within_search_window(self):
        rng = np.random.default_rng(2)
        for trial in range(20):
            t_step = rng.integers(5, 35)
            peaks = np.where(np.arange(40) < t_step, 1.0, 0.25)
            peaks = peaks * rng.uniform(0.9, 1.1, size=40)
            decision = detect_turning(peaks, t0=4, kappa=1.9)
            if decision.kind != NONE:
                assert 4 <= decision.frame <= 40 - 4 - 2

    def test_noisy_step_detected_near_truth(self):
        rng = np.random.default_rng(3)
        t_step = 50
        peaks = np.where(np.arange(100) < t_step, 0.8, 0.25)
        peaks += rng.normal(0.0, 0.03, size=100)
        decision = detect_turning(peaks, t0=10, kappa=1.9)
        assert decision.kind == FRONT_TO_BACK
        assert abs(decision.frame - t_step) <= 2

    def test_default_t0_is_tenth_of_length(self):
        peaks = np.where(np.arange(100) < 50, 0.8, 0.2)
        decision = detect_turning(peaks, kappa=1.9)
        assert decision.kind == FRONT_TO_BACK
        assert 10 <= decision.frame <= 100 - 10 - 2

    def test_degenerate_window_rejected(self):
        with pytest.raises(InputError):
            detect_turning(np.ones(4), t0=2, kappa=1.9)
        with pytest.raises(InputError):
            detect_turning(np.ones(8), t0=0, kappa=1.9)


def simple_trajectory(n=8):
    positions = np.column_stack([
        np.linspace(-0.5, 0.5, n),
        np.linspace(1.2, 0.8, n),
        np.full(n, 1.5),
    ])
    return Trajectory(np.arange(n) * 0.1 + 0.1, positions)


class TestApplyCorrection:
    def test_none_is_identity(self):
        traj = simple_trajectory()
        decision = TurningDecision(NONE, None, np.ones(8), np.ones(8))
        corrected = apply_correction(traj, decision)
        assert np.array_equal(corrected.positions, traj.positions)

    def test_front_to_back_flips_y_from_frame(self):
        traj = simple_trajectory()
        decision = TurningDecision(FRONT_TO_BACK, 5, np.ones(8), np.ones(8))
        corrected = apply_correction(traj, decision)
        assert np.array_equal(corrected.positions[:5], traj.positions[:5])
        assert np.allclose(corrected.positions[5:, 1], -traj.positions[5:, 1])
        assert np.array_equal(corrected.positions[5:, [0, 2]],
                              traj.positions[5:, [0, 2]])

    def test_back_to_front_flips_y_before_frame(self):
        traj = simple_trajectory()
        decision = TurningDecision(BACK_TO_FRONT, 3, np.ones(8), np.ones(8))
        corrected = apply_correction(traj, decision)
        assert np.allclose(corrected.positions[:3, 1], -traj.positions[:3, 1])
        assert np.array_equal(corrected.positions[3:], traj.positions[3:])

    def test_double_application_restores_input(self):
        traj = simple_trajectory()
        decision = TurningDecision(FRONT_TO_BACK, 2, np.ones(8), np.ones(8))
        twice = apply_correction(apply_correction(traj, decision), decision)
        assert np.array_equal(twice.positions, traj.positions)

    def test_specific_point_flip(self):
        traj = Trajectory(np.array([0.1, 0.2]),
                          np.array([[0.5, 1.2, 1.5], [0.5, 1.2, 1.5]]))
        decision = TurningDecision(FRONT_TO_BACK, 1, np.ones(2), np.ones(2))
        corrected = apply_correction(traj, decision)
        assert np.allclose(corrected.positions[1], [0.5, -1.2, 1.5])


def test_ratio_csv(tmp_path):
    peaks = STEP_DOWN_BIG
    decision = detect_turning(peaks, t0=1, kappa=1.9)
    path = tmp_path / "ratios.csv"
    write_ratio_csv(path, np.arange(8) * 0.1, decision)
    lines = path.read_text().splitlines()
    assert lines[0] == "timestamp_s,ratio_front_back,ratio_back_front"
    assert len(lines) == 9
    assert float(lines[5].split(",")[1]) == pytest.approx(2.6)
