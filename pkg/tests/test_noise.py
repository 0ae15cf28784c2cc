import math

import numpy as np
import pytest

from mdrobustness.errors import NoiseInjectionError, NoiseSpecError
from mdrobustness.signal_chain.ingest import (
    IQMeasurement,
    RadarParams,
    TargetClass,
    contiguous_segments,
)
from mdrobustness.signal_chain.noise import (
    NoiseMode,
    NoiseSpec,
    Severity,
    apply_noise,
    awgn_inject,
    awgn_variance,
    combined_inject,
    noise_schedule,
    parse_noise_spec,
    phase_inject,
)

N_LONG = 2**16


def tone(n_samples, segment_len=None, n_range_bins=1, amplitudes=(1.0,), id="tone"):
    segment_len = segment_len or n_samples
    n_segments = n_samples // segment_len
    t = np.arange(n_samples)
    gain = np.repeat(np.asarray(amplitudes, dtype=float), segment_len)
    samples = np.zeros((n_range_bins, n_samples), dtype=np.complex128)
    samples[0] = gain * np.exp(2j * np.pi * 0.1 * t)
    return IQMeasurement(
        id=id,
        label=TargetClass.REFLECTOR,
        params=RadarParams(n_range_bins=n_range_bins, segment_len=segment_len),
        samples=samples,
        segment_boundaries=contiguous_segments(n_segments, segment_len),
    )


def measured_snr_db(clean, noisy):
    noise = noisy.samples[0] - clean.samples[0]
    p_signal = np.mean(np.abs(clean.samples[0]) ** 2)
    return 10 * math.log10(p_signal / np.mean(np.abs(noise) ** 2))


class TestAwgn:
    @pytest.mark.parametrize("snr_db, factor", [(0, 1.0), (-10, 10.0), (10, 0.1)])
    def test_variance_law(self, snr_db, factor):
        assert awgn_variance(2.0, snr_db) == pytest.approx(2.0 * factor)

    def test_calibration_on_long_segment(self):
        m = tone(N_LONG)
        assert measured_snr_db(m, awgn_inject(m, 5.0, seed=42)) == pytest.approx(5.0, abs=0.2)

    def test_noise_is_circular(self):
        m = tone(N_LONG)
        noise = awgn_inject(m, 0.0, seed=1).samples[0] - m.samples[0]
        assert np.var(noise.real) == pytest.approx(0.5, rel=0.05)
        assert np.var(noise.imag) == pytest.approx(0.5, rel=0.05)

    def test_calibrated_per_segment(self):
        m = tone(2 * 4096, segment_len=4096, amplitudes=(1.0, 10.0))
        noise = awgn_inject(m, 0.0, seed=3).samples[0] - m.samples[0]
        quiet = np.mean(np.abs(noise[:4096]) ** 2)
        loud = np.mean(np.abs(noise[4096:]) ** 2)
        assert loud / quiet == pytest.approx(100.0, rel=0.1)

    def test_every_range_bin_is_corrupted(self):
        m = tone(1024, n_range_bins=3)
        noisy = awgn_inject(m, 0.0, seed=3)
        assert (np.abs(noisy.samples[1:]) > 0).all()

    def test_zero_power_segment(self):
        m = tone(64, segment_len=32, amplitudes=(1.0, 0.0), id="silent")
        with pytest.raises(NoiseInjectionError, match="silent: segment 1"):
            awgn_inject(m, 0.0, seed=0)

    def test_deterministic_and_keyed_by_id(self):
        a = awgn_inject(tone(512), 0.0, seed=7)
        b = awgn_inject(tone(512), 0.0, seed=7)
        c = awgn_inject(tone(512, id="other"), 0.0, seed=7)
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)

    def test_input_is_not_mutated(self):
        m = tone(256)
        before = m.samples.copy()
        awgn_inject(m, -10.0, seed=0)
        assert np.array_equal(m.samples, before)


class TestPhase:
    def test_zero_degrees_is_identity(self):
        m = tone(256)
        assert np.array_equal(phase_inject(m, 0.0, seed=1).samples, m.samples)

    def test_modulus_preserved(self):
        m = tone(4096, n_range_bins=2)
        m.samples[1] = 0.5 + 0.25j
        out = phase_inject(m, 7.0, seed=1)
        assert np.allclose(np.abs(out.samples), np.abs(m.samples), rtol=0, atol=1e-12)

    def test_phase_spread(self):
        m = tone(N_LONG)
        out = phase_inject(m, 10.0, seed=4)
        phi = np.angle(out.samples[0] / m.samples[0])
        assert np.std(phi) == pytest.approx(0.1745, abs=0.005)

    def test_negative_degrees(self):
        with pytest.raises(NoiseSpecError):
            phase_inject(tone(64), -1.0, seed=0)


class TestCombined:
    def test_vanishing_noise_limit(self):
        m = tone(4096)
        out = combined_inject(m, 60.0, 0.0, seed=2)
        error = np.linalg.norm(out.samples - m.samples) / np.linalg.norm(m.samples)
        assert error < 1e-2

    def test_magnitudes_differ_from_phase_only(self):
        m = tone(4096)
        combined = combined_inject(m, 0.0, 5.0, seed=2)
        phase_only = phase_inject(m, 5.0, seed=2)
        assert np.allclose(np.abs(phase_only.samples), 1.0)
        assert not np.allclose(np.abs(combined.samples), 1.0, atol=1e-3)

    def test_apply_noise_dispatch(self):
        m = tone(512)
        assert apply_noise(m, NoiseSpec(NoiseMode.RAW)) is m
        spec = NoiseSpec(NoiseMode.COMBINED, snr_db=-1.0, phase_deg=3.0, seed=5)
        assert np.array_equal(
            apply_noise(m, spec).samples, combined_inject(m, -1.0, 3.0, seed=5).samples
        )


class TestNoiseSpec:
    def test_combined_tier(self):
        assert NoiseSpec(NoiseMode.COMBINED, snr_db=-3, phase_deg=1).severity is Severity.MILD

    @pytest.mark.parametrize(
        "snr_db, severity",
        [
            (-10, Severity.SEVERE),
            (-5, Severity.MODERATE),
            (0, Severity.MODERATE),
            (5, Severity.MILD),
        ],
    )
    def test_awgn_tiers(self, snr_db, severity):
        assert NoiseSpec(NoiseMode.AWGN, snr_db=snr_db).severity is severity

    def test_missing_parameter(self):
        with pytest.raises(NoiseSpecError, match="requires snr_db"):
            NoiseSpec(NoiseMode.AWGN)

    def test_raw_takes_no_parameters(self):
        with pytest.raises(NoiseSpecError, match="takes no phase_deg"):
            NoiseSpec(NoiseMode.RAW, phase_deg=2.0)

    def test_parse(self):
        spec = parse_noise_spec("combined:-1:3", seed=9)
        assert (spec.mode, spec.snr_db, spec.phase_deg, spec.seed) == (
            NoiseMode.COMBINED,
            -1.0,
            3.0,
            9,
        )
        assert spec.severity is Severity.MODERATE
        assert str(spec) == "combined:-1:3"
        assert str(parse_noise_spec("raw")) == "raw"
        assert str(parse_noise_spec("awgn:2.5")) == "awgn:2.5"

    @pytest.mark.parametrize("text", ["awgn:abc", "awgn", "phase:1:2", "thermal:3"])
    def test_malformed(self, text):
        with pytest.raises(NoiseSpecError, match="expected mode"):
            parse_noise_spec(text)


def test_schedule():
    schedule = noise_schedule()
    assert len(schedule) == 33
    counts = {mode: sum(s.mode is mode for s in schedule) for mode in NoiseMode}
    assert counts == {
        NoiseMode.RAW: 1,
        NoiseMode.AWGN: 13,
        NoiseMode.PHASE: 10,
        NoiseMode.COMBINED: 9,
    }
    by_name = {str(s): s for s in schedule}
    assert by_name["combined:5:8"].severity is Severity.SEVERE
    assert by_name["awgn:-10"].severity is Severity.SEVERE
    assert by_name["raw"].param_label == ""
    assert by_name["raw"].severity is Severity.NONE
    assert {s.seed for s in schedule} == {42}
