import numpy as np
import pytest

from mdrobustness.errors import DegenerateSpectrogramError
from mdrobustness.signal_chain.ingest import (
    IQMeasurement,
    RadarParams,
    SynthTargetSpec,
    TargetClass,
    contiguous_segments,
    synth_measurement,
)
from mdrobustness.signal_chain.spectro import (
    DB_FLOOR,
    build_spectrogram,
    doppler_axis,
    read_spectrogram,
    segment_spectrum,
    select_range_bin,
    standardize_columns,
    to_db,
    write_spectrogram,
)


def constant_cube(energies, segment_len=8):
    params = RadarParams(n_range_bins=len(energies), segment_len=segment_len)
    amplitude = np.sqrt(np.asarray(energies, dtype=np.float64) / segment_len)
    samples = np.repeat(amplitude[:, None], segment_len, axis=1).astype(np.complex128)
    return IQMeasurement(
        id="cube",
        label=TargetClass.REFLECTOR,
        params=params,
        samples=samples,
        segment_boundaries=contiguous_segments(1, segment_len),
    )


def reflector(n_segments, **kwargs):
    params = RadarParams(**kwargs)
    spec = SynthTargetSpec(
        TargetClass.REFLECTOR, 2 * params.doppler_resolution_hz, n_segments=n_segments, seed=5
    )
    return synth_measurement(spec, params)


class TestSelectRangeBin:
    def test_largest_energy(self):
        assert select_range_bin(constant_cube([1.0, 5.0, 2.0]), 0) == 1

    def test_ties_go_to_lowest_index(self):
        assert select_range_bin(constant_cube([3.0, 3.0, 3.0]), 0) == 0

    def test_injected_target(self):
        params = RadarParams(n_range_bins=16)
        spec = SynthTargetSpec(TargetClass.DRONE, 100.0, 1500.0, 4500.0, n_segments=3, range_bin=7)
        m = synth_measurement(spec, params)
        assert [select_range_bin(m, k) for k in range(3)] == [7, 7, 7]


class TestSegmentSpectrum:
    def test_constant_vector_has_no_dc(self):
        c = 3.0 + 4.0j
        spectrum = segment_spectrum(np.full(64, c))
        assert spectrum[32] <= 1e-20 * abs(c) ** 2 * 64

    def test_quarter_prf_tone(self):
        n = np.arange(64)
        spectrum = segment_spectrum(np.exp(2j * np.pi * n / 4))
        assert abs(int(np.argmax(spectrum)) - (32 + 16)) <= 1

    def test_conjugate_mirrors_about_centre(self):
        n = np.arange(64)
        tone = np.exp(2j * np.pi * 5 * n / 64 + 0.3j)
        forward = segment_spectrum(tone)
        mirrored = segment_spectrum(np.conj(tone))
        # index 0 has no mirror partner in an even-length centred spectrum
        assert np.allclose(forward[1:], mirrored[1:][::-1])

    def test_parseval(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(128) + 1j * rng.standard_normal(128)
        windowed = (x - x.mean()) * (0.5 * (1 - np.cos(2 * np.pi * np.arange(128) / 127)))
        expected = np.sum(np.abs(windowed) ** 2) * 128
        assert segment_spectrum(x).sum() == pytest.approx(expected, rel=1e-9)

    def test_non_negative(self):
        rng = np.random.default_rng(1)
        assert (segment_spectrum(rng.standard_normal(32) + 0j) >= 0).all()

    def test_too_short(self):
        with pytest.raises(ValueError, match="at least 8"):
            segment_spectrum(np.ones(7, dtype=complex))


def test_doppler_axis_is_centred():
    axis = doppler_axis(256, 17e3)
    assert axis[128] == 0
    assert (np.diff(axis) > 0).all()
    assert axis[0] == pytest.approx(-8500.0)


class TestStandardize:
    def test_crop_is_centred_with_trailing_extra(self):
        power = np.arange(35, dtype=float)[None, :]
        cropped, mask = standardize_columns(power, 32)
        assert cropped[0, 0] == 1
        assert cropped.shape == (1, 32)
        assert not mask.any()

    def test_pad_counts(self):
        padded, mask = standardize_columns(np.ones((4, 20)), 32)
        assert mask.sum() == 12
        assert mask[:6].all() and mask[26:].all()
        assert not mask[6:26].any()
        assert (padded[:, mask] == 0).all()

    def test_odd_pad_is_right_heavy(self):
        _, mask = standardize_columns(np.ones((4, 21)), 32)
        assert mask[:5].all() and not mask[5]
        assert mask[26:].all() and not mask[25]


def test_to_db_floor_and_peak():
    db = to_db(np.array([[0.0, 1.0], [4.0, 2.0]]))
    assert db.max() == 0.0
    assert db[0, 0] == DB_FLOOR
    assert db[0, 1] == pytest.approx(-10 * np.log10(4))


def test_to_db_degenerate():
    with pytest.raises(DegenerateSpectrogramError):
        to_db(np.zeros((4, 4)))


class TestBuildSpectrogram:
    def test_long_measurement_is_cropped(self):
        s = build_spectrogram(reflector(40), 32)
        assert s.values_db.shape == (256, 32)
        assert not s.pad_mask.any()
        assert s.values_db.max() == 0.0
        assert s.values_db.min() >= DB_FLOOR

    def test_short_measurement_is_padded(self):
        s = build_spectrogram(reflector(20), 32)
        assert s.n_time == 32
        assert s.pad_mask.sum() == 12
        assert (s.values_db[:, s.pad_mask] == DB_FLOOR).all()

    def test_peak_bin_is_body_line(self):
        m = reflector(40)
        s = build_spectrogram(m, 32)
        row = np.unravel_index(np.argmax(s.values_db), s.values_db.shape)[0]
        assert s.doppler_axis_hz[row] == pytest.approx(2 * m.params.doppler_resolution_hz)

    def test_all_zero_measurement(self):
        m = constant_cube([0.0, 0.0])
        with pytest.raises(DegenerateSpectrogramError, match="cube"):
            build_spectrogram(m, 4)

    def test_window_too_small(self):
        with pytest.raises(ValueError):
            build_spectrogram(reflector(4), 1)


def test_spectrogram_dump_round_trip(tmp_path):
    s = build_spectrogram(reflector(10, segment_len=64), 16)
    write_spectrogram(s, tmp_path / "s")
    loaded = read_spectrogram(tmp_path / "s")
    assert loaded.measurement_id == s.measurement_id
    assert loaded.label is TargetClass.REFLECTOR
    assert np.array_equal(loaded.pad_mask, s.pad_mask)
    assert np.array_equal(loaded.values_db, s.values_db.astype(np.float32).astype(np.float64))
