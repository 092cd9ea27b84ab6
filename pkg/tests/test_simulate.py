import math

import numpy as np
import pytest

from qamlink.channel import complex_noise, noise_generator
from qamlink.config import RunConfig
from qamlink.modem import theoretical_ber
from qamlink.simulate import (
    SimConfig,
    estimate_spectrum,
    gaussian_taps,
    pulse_shape,
    run_link_sim,
    transmit_waveform,
    welch_psd,
    wilson_interval,
)


def calibration_config(order=4, ebn0_db=7.0, n_bits=200_000, seed=1, **overrides):
    cfg = RunConfig()
    cfg.modulation_order = order
    cfg.pulse_shape = "rectangular"
    cfg.samples_per_symbol = 2
    cfg.ebn0_override_db = None
    cfg.rx_nf_override_db = None
    cfg.n_bits = n_bits
    cfg.seed = seed
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg.sim_config(calibration_ebn0_db=ebn0_db, pa_linear=True)


class TestWilsonInterval:
    def test_contains_point_estimate(self):
        for k, n in ((0, 100), (5, 1000), (999, 1000), (1, 7)):
            lo, hi = wilson_interval(k, n)
            assert lo <= k / n <= hi
            assert 0.0 <= lo <= hi <= 1.0

    def test_zero_errors_has_meaningful_upper_bound(self):
        lo, hi = wilson_interval(0, 10_000_000)
        assert lo == 0.0
        assert hi == pytest.approx(3.8414573450141057e-07, rel=1e-9)

    def test_frozen_value(self):
        lo, hi = wilson_interval(5, 1000)
        assert lo == pytest.approx(0.0021375355273244596, rel=1e-9)
        assert hi == pytest.approx(0.011650955373375111, rel=1e-9)

    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            wilson_interval(1, 0)
        with pytest.raises(ValueError):
            wilson_interval(5, 4)


class TestPulseShaping:
    def test_gaussian_taps_unit_dc_and_symmetric(self):
        for bt in (0.3, 0.5, 1.0):
            taps = gaussian_taps(bt, 8)
            assert taps.sum() == pytest.approx(1.0, abs=1e-9)
            np.testing.assert_allclose(taps, taps[::-1], rtol=0, atol=0)

    def test_gaussian_taps_rejects_bad_bt(self):
        with pytest.raises(ValueError):
            gaussian_taps(0.0, 8)

    def test_rectangular_hold(self):
        config = calibration_config()
        held = pulse_shape(np.array([1 + 0j]), config)
        np.testing.assert_array_equal(held, np.ones(2, dtype=complex))

    def test_isolated_symbol_peaks_at_sampling_instant(self):
        """The filtered hold is symmetric about sps//2 into the symbol."""
        cfg = RunConfig()
        cfg.gaussian_bt = 0.5
        config = cfg.sim_config()
        symbols = np.zeros(5, dtype=complex)
        symbols[2] = 1.0
        wave = np.abs(pulse_shape(symbols, config))
        center = 2 * 8 + 4
        assert np.argmax(wave) == center
        np.testing.assert_allclose(wave[center - 4:center], wave[center + 4:center:-1],
                                   rtol=1e-12)

    def test_lower_bt_slews_less(self):
        symbols = np.array([1.0, -1.0] * 64, dtype=complex)
        cfg = RunConfig()
        slews = []
        for bt in (0.3, 1.0):
            cfg.gaussian_bt = bt
            wave = pulse_shape(symbols, cfg.sim_config())
            slews.append(np.max(np.abs(np.diff(wave))))
        assert slews[0] < slews[1]


class TestSpectrumEstimate:
    def test_single_tone_peak_location(self):
        fs = 1e9
        t = np.arange(1 << 16)
        psd = estimate_spectrum(np.exp(2j * np.pi * 0.123 * t), fs, 64)
        bin_width = psd[1, 0] - psd[0, 0]
        peak_freq = psd[np.argmax(psd[:, 1]), 0]
        assert abs(peak_freq - 0.123 * fs) <= bin_width

    def test_white_noise_is_flat(self):
        """64 half-overlapping segments keep every bin within 1.5 dB of the
        mean level for this frozen draw."""
        x = complex_noise(noise_generator(2, 0), (65 * 64) // 2, 1.0)
        psd = estimate_spectrum(x, 1.0, 64)
        db = psd[:, 1]
        assert np.abs(db - db.mean()).max() <= 1.5

    def test_frequencies_span_sampling_band(self):
        x = complex_noise(noise_generator(0, 0), 4096, 1.0)
        fs = 8e6
        psd = estimate_spectrum(x, fs, 15)
        assert psd[0, 0] == pytest.approx(-fs / 2, rel=1e-9)
        assert psd[-1, 0] < fs / 2
        assert np.max(psd[:, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_welch_psd_parseval(self):
        x = complex_noise(noise_generator(5, 0), 1 << 17, 2.5)
        freqs, density = welch_psd(x, 8.0, 512)
        integral = np.sum(density) * (8.0 / 512)
        assert integral == pytest.approx(np.mean(np.abs(x) ** 2), rel=0.01)

    def test_too_short_input_rejected(self):
        with pytest.raises(ValueError):
            welch_psd(np.ones(100, dtype=complex), 1.0, 512)
        with pytest.raises(ValueError):
            estimate_spectrum(np.ones(2, dtype=complex), 1.0, 1)


class TestSimConfigValidation:
    def test_ragged_bits_rejected(self):
        cfg = RunConfig()
        cfg.n_bits = 1001  # not a multiple of 8
        with pytest.raises(ValueError):
            cfg.sim_config()

    def test_too_few_samples_per_symbol(self):
        cfg = RunConfig()
        cfg.samples_per_symbol = 1
        with pytest.raises(ValueError):
            cfg.sim_config()

    def test_unknown_pulse_shape(self):
        scenario = RunConfig().scenario()
        from qamlink.rfchain import ChainSpec, StageSpec
        with pytest.raises(ValueError):
            SimConfig(scenario=scenario,
                      tx_chain=ChainSpec((StageSpec("u", 0.0, 0.0),)),
                      n_bits=800, pulse_shape="triangular")


class TestRunLinkSim:
    def test_distortion_free_chain(self):
        cfg = RunConfig()
        cfg.pulse_shape = "rectangular"
        cfg.n_bits = 80_000
        result = run_link_sim(cfg.sim_config(noise_enabled=False, pa_linear=True))
        assert result.measured_ber == 0.0
        assert result.n_bit_errors == 0
        assert result.rx_evm_pct < 0.1
        assert result.tx_evm_pct < 0.1

    def test_qpsk_awgn_matches_theory(self):
        """Calibrated AWGN at 7 dB: BER within a small factor of the
        closed-form value and the interval covers it."""
        result = run_link_sim(calibration_config(4, 7.0, 2_000_000, seed=3))
        theory = theoretical_ber(4, 7.0)
        lo, hi = result.ber_confidence
        assert lo <= theory <= hi
        assert theory / 1.3 < result.measured_ber < theory * 1.3

    def test_evm_tracks_snr_in_calibration_runs(self):
        """rx EVM ~ 100/sqrt(SNR) over 10..30 dB of per-symbol SNR."""
        for snr_db in (10.0, 20.0, 30.0):
            ebn0 = snr_db - 10 * math.log10(2)  # QPSK: 2 bits/symbol
            result = run_link_sim(calibration_config(4, ebn0, 100_000, seed=9))
            expected = 100.0 / math.sqrt(10 ** (snr_db / 10))
            assert result.rx_evm_pct == pytest.approx(expected, rel=0.10)

    def test_tx_evm_decreases_with_backoff(self):
        values = []
        for backoff in (2.69, 8.69, 14.69):
            cfg = RunConfig()
            cfg.n_bits = 100_000
            cfg.pa_backoff_db = backoff
            values.append(run_link_sim(cfg.sim_config()).tx_evm_pct)
        assert values[0] > values[1] > values[2]

    def test_result_shapes_and_invariants(self):
        cfg = RunConfig()
        cfg.n_bits = 200_000
        result = run_link_sim(cfg.sim_config())
        lo, hi = result.ber_confidence
        assert 0.0 <= lo <= result.measured_ber <= hi <= 1.0
        assert result.tx_constellation.size <= 4096
        assert result.rx_constellation.size <= 4096
        fs = result.sample_rate_hz
        assert result.psd[0, 0] == pytest.approx(-fs / 2, rel=1e-9)
        assert result.psd[-1, 0] < fs / 2
        assert result.n_bits_run == 200_000

    def test_deterministic_rerun(self):
        cfg = RunConfig()
        cfg.n_bits = 120_000
        a = run_link_sim(cfg.sim_config())
        b = run_link_sim(cfg.sim_config())
        assert a.measured_ber == b.measured_ber
        assert a.tx_evm_pct == b.tx_evm_pct
        assert a.rx_evm_pct == b.rx_evm_pct
        np.testing.assert_array_equal(a.psd, b.psd)
        np.testing.assert_array_equal(a.rx_constellation, b.rx_constellation)

    def test_worker_count_does_not_change_results(self, monkeypatch):
        """Multi-block run reduced on one thread and on four is bit-identical."""
        config = calibration_config(4, 4.0, 163_840, seed=5)
        results = []
        for threads in ("1", "4"):
            monkeypatch.setenv("QAMLINK_THREADS", threads)
            results.append(run_link_sim(config))
        a, b = results
        assert a.measured_ber == b.measured_ber
        assert a.n_bit_errors == b.n_bit_errors
        assert a.tx_evm_pct == b.tx_evm_pct
        assert a.rx_evm_pct == b.rx_evm_pct
        np.testing.assert_array_equal(a.psd, b.psd)
        np.testing.assert_array_equal(a.tx_constellation, b.tx_constellation)
        np.testing.assert_array_equal(a.rx_constellation, b.rx_constellation)

    def test_transmit_waveform_matches_sim_prefix(self):
        cfg = RunConfig()
        cfg.n_bits = 80_000
        wave, fs = transmit_waveform(cfg.sim_config(), max_samples=4096)
        assert wave.size == 4096
        assert fs == 8 * 125e6
