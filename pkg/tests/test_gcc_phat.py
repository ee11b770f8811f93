import numpy as np
import pytest

from gcftrack.errors import InputError
from gcftrack.gcc_phat import (
    GccFrame,
    LagOutOfRange,
    correlation_at,
    gcc_phat,
    pair_max_lag,
)


def spectra_pair(n=1024, delay=0, seed=0):
    """White-noise signal and a circularly delayed copy, as spectra."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    b = np.roll(a, delay)          # b[t] = a[t - delay]: b delayed by +delay
    return np.fft.rfft(a), np.fft.rfft(b), a, b


def time_domain_correlation(a, b, max_lag):
    """Oracle: circular cross correlation by explicit shifting."""
    n = len(a)
    out = np.empty(2 * max_lag + 1)
    for k, lag in enumerate(range(-max_lag, max_lag + 1)):
        out[k] = np.dot(a, np.roll(b, -lag)) / n
    return out


def time_domain_phat(a, b, max_lag):
    """Oracle: whiten each signal's spectrum, correlate in the time domain."""
    spec_a = np.fft.rfft(a)
    spec_b = np.fft.rfft(b)
    white_a = np.fft.irfft(spec_a / np.abs(spec_a), n=len(a))
    white_b = np.fft.irfft(spec_b / np.abs(spec_b), n=len(b))
    n = len(a)
    out = np.empty(2 * max_lag + 1)
    for k, lag in enumerate(range(-max_lag, max_lag + 1)):
        out[k] = np.dot(white_a, np.roll(white_b, -lag)) * n
    return out


class TestGccPhat:
    def test_identical_spectra_peak_at_zero(self):
        spec_a, _, _, _ = spectra_pair(seed=1)
        corr = gcc_phat(spec_a, spec_a, 32)
        assert np.argmax(corr) == 32
        assert corr[32] == pytest.approx(1.0, abs=1e-6)

    def test_integer_delay_matches_time_domain_oracle(self):
        spec_a, spec_b, a, b = spectra_pair(delay=7, seed=2)
        max_lag = 20
        oracle = time_domain_correlation(a, b, max_lag)
        assert np.argmax(oracle) - max_lag == 7
        corr = gcc_phat(spec_a, spec_b, max_lag)
        assert np.argmax(corr) - max_lag == 7

    def test_zero_spectra_give_zero_correlation(self):
        z = np.zeros(513, dtype=complex)
        assert np.all(gcc_phat(z, z, 16) == 0.0)

    def test_matches_whitened_time_domain_correlation(self):
        # same identity the acceptance suite checks, on one frame
        _, _, a, b = spectra_pair(delay=5, seed=3)
        corr = gcc_phat(np.fft.rfft(a), np.fft.rfft(b), 24)
        oracle = time_domain_phat(a, b, 24) / len(a)
        assert np.max(np.abs(corr - oracle)) < 1e-6

    def test_swap_symmetry(self):
        spec_a, spec_b, _, _ = spectra_pair(delay=4, seed=4)
        forward = gcc_phat(spec_a, spec_b, 16)
        backward = gcc_phat(spec_b, spec_a, 16)
        assert np.max(np.abs(forward[::-1] - backward)) < 1e-9

    def test_scale_invariance(self):
        spec_a, spec_b, _, _ = spectra_pair(delay=3, seed=5)
        base = gcc_phat(spec_a, spec_b, 16)
        scaled = gcc_phat(spec_a * 37.5, spec_b * 0.001, 16)
        assert np.max(np.abs(base - scaled)) < 1e-9

    def test_delay_equivariance(self):
        for delay in (-11, -2, 0, 6, 15):
            spec_a, spec_b, _, _ = spectra_pair(delay=delay, seed=40 + delay)
            corr = gcc_phat(spec_a, spec_b, 20)
            assert np.argmax(corr) - 20 == delay

    def test_peak_bounded_by_one(self):
        for seed in range(6):
            spec_a, spec_b, _, _ = spectra_pair(delay=seed, seed=seed)
            corr = gcc_phat(spec_a, spec_b, 30)
            assert np.max(np.abs(corr)) <= 1.0 + 1e-6

    def test_validation(self):
        spec = np.fft.rfft(np.random.default_rng(0).normal(size=256))
        with pytest.raises(InputError):
            gcc_phat(spec, spec[:-1], 16)
        with pytest.raises(InputError):
            gcc_phat(spec, spec, 16, epsilon=0.0)
        with pytest.raises(InputError):
            gcc_phat(spec, spec, 128)

    def test_frame_wrapper_records_peak(self):
        spec_a, spec_b, _, _ = spectra_pair(delay=9, seed=6)
        frame = GccFrame.from_spectra(2, 1.5, spec_a, spec_b, 16)
        assert frame.pair_index == 2
        assert frame.timestamp == 1.5
        assert frame.peak_lag == 9
        assert frame.peak_value == pytest.approx(np.max(frame.correlation))
        assert len(frame.correlation) == 33


class TestCorrelationAt:
    def setup_method(self):
        rng = np.random.default_rng(9)
        self.corr = rng.normal(size=21)     # max_lag 10
        self.rate = 128.0                   # binary-exact so k/rate*rate == k

    def test_integer_lag_is_stored_value(self):
        for k in (-10, -3, 0, 7, 10):
            assert correlation_at(self.corr, k / self.rate, self.rate) == \
                pytest.approx(self.corr[k + 10], abs=1e-15)

    def test_midpoint_is_mean_of_neighbors(self):
        value = correlation_at(self.corr, 3.5 / self.rate, self.rate)
        assert value == pytest.approx((self.corr[13] + self.corr[14]) / 2)

    def test_within_neighbor_bounds(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            x = rng.uniform(-10, 10)
            k = int(np.floor(x))
            k_hi = min(k + 1, 10)
            lo = min(self.corr[k + 10], self.corr[k_hi + 10])
            hi = max(self.corr[k + 10], self.corr[k_hi + 10])
            value = correlation_at(self.corr, x / self.rate, self.rate)
            assert lo - 1e-12 <= value <= hi + 1e-12

    def test_out_of_range_raises(self):
        with pytest.raises(LagOutOfRange):
            correlation_at(self.corr, 10.5 / self.rate, self.rate)


def test_pair_max_lag():
    # 0.32 m pair at 48 kHz: 0.32 / 343 * 48000 = 44.78 -> ceil 45 + 2 slack
    assert pair_max_lag(0.32, 48000.0) == 47
    with pytest.raises(InputError):
        pair_max_lag(0.0, 48000.0)
