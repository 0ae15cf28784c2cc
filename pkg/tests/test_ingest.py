import json

import numpy as np
import pytest

from mdrobustness.errors import ContainerError, SynthesisError
from mdrobustness.signal_chain.ingest import (
    MANIFEST_NAME,
    PAYLOAD_NAME,
    IQMeasurement,
    MeasurementReader,
    RadarParams,
    SynthTargetSpec,
    TargetClass,
    contiguous_segments,
    duration_summary,
    load_dataset,
    load_measurement,
    measurement_digest,
    reference_ratio_counts,
    synth_dataset,
    synth_measurement,
    validate_measurement,
    write_dataset,
    write_measurement,
)
from mdrobustness.signal_chain.spectro import doppler_axis, segment_power_matrix


def small_measurement(dtype=np.complex64, label="bird"):
    params = RadarParams(n_range_bins=2, segment_len=32)
    rng = np.random.default_rng(3)
    samples = (rng.standard_normal((2, 64)) + 1j * rng.standard_normal((2, 64))).astype(dtype)
    return IQMeasurement(
        id="m_001",
        label=TargetClass.parse(label),
        params=params,
        samples=samples,
        segment_boundaries=contiguous_segments(2, 32),
    )


class TestContainers:
    def test_round_trip_is_bit_exact(self, tmp_path):
        m = small_measurement()
        write_measurement(m, tmp_path / "m")
        loaded = load_measurement(tmp_path / "m")
        assert loaded.n_slow_time == 64
        assert loaded.n_segments == 2
        assert loaded.segment_boundaries == [(0, 32), (32, 64)]
        assert loaded.label is TargetClass.BIRD
        assert loaded.samples.dtype == np.complex64
        assert loaded.samples.tobytes() == m.samples.tobytes()

    def test_complex128_round_trip(self, tmp_path):
        m = small_measurement(np.complex128)
        write_measurement(m, tmp_path / "m")
        loaded = load_measurement(tmp_path / "m")
        assert loaded.samples.dtype == np.complex128
        assert np.array_equal(loaded.samples, m.samples)

    def test_payload_is_interleaved_float32(self, tmp_path):
        m = small_measurement()
        write_measurement(m, tmp_path / "m")
        raw = np.fromfile(tmp_path / "m" / PAYLOAD_NAME, dtype="<f4")
        assert raw.size == 2 * 2 * 64
        assert raw[0] == m.samples[0, 0].real
        assert raw[1] == m.samples[0, 0].imag

    def test_truncated_payload(self, tmp_path):
        m = small_measurement()
        write_measurement(m, tmp_path / "m")
        raw = np.fromfile(tmp_path / "m" / PAYLOAD_NAME, dtype="<f4")
        raw[:-16].tofile(tmp_path / "m" / PAYLOAD_NAME)
        with pytest.raises(ContainerError, match="dimension mismatch"):
            load_measurement(tmp_path / "m")

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ContainerError, match="missing manifest"):
            load_measurement(tmp_path)

    def test_unknown_label(self, tmp_path):
        write_measurement(small_measurement(), tmp_path / "m")
        manifest_path = tmp_path / "m" / MANIFEST_NAME
        manifest = json.loads(manifest_path.read_text())
        manifest["label"] = "helicopter"
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(ContainerError, match="unknown class label 'helicopter'"):
            load_measurement(tmp_path / "m")

    def test_nan_rejected_before_write(self, tmp_path):
        m = small_measurement()
        m.samples[1, 5] = np.nan
        with pytest.raises(ContainerError, match="non-finite"):
            write_measurement(m, tmp_path / "m")
        assert not (tmp_path / "m").exists()

    def test_empty_segment_list_rejected(self):
        m = small_measurement()
        m.segment_boundaries = []
        with pytest.raises(ContainerError, match="segment list is empty"):
            validate_measurement(m)

    def test_segment_length_mismatch(self):
        m = small_measurement()
        m.segment_boundaries = [(0, 30), (30, 64)]
        with pytest.raises(ContainerError, match="segment_len"):
            validate_measurement(m)

    def test_unsupported_reader_format(self, tmp_path):
        with pytest.raises(ValueError, match="Format 'zenodo' is not supported."):
            MeasurementReader.load(tmp_path, "zenodo")

    def test_registered_reader_is_used(self, tmp_path):
        calls = []

        def reader(path):
            calls.append(path)
            return small_measurement()

        MeasurementReader("test-format", reader)
        assert MeasurementReader.load(tmp_path, "test-format").id == "m_001"
        assert calls == [tmp_path]


def test_radar_params_invariants():
    with pytest.raises(ContainerError):
        RadarParams(prf_hz=0)
    with pytest.raises(ContainerError):
        RadarParams(segment_len=4)
    with pytest.raises(ContainerError):
        RadarParams(n_range_bins=0)
    assert RadarParams().doppler_resolution_hz == pytest.approx(17e3 / 256)


class TestSynthesis:
    def test_deterministic(self):
        spec = SynthTargetSpec(TargetClass.DRONE, 100.0, 1500.0, 4500.0, n_segments=4, seed=9)
        a = synth_measurement(spec, RadarParams())
        b = synth_measurement(spec, RadarParams())
        assert np.array_equal(a.samples, b.samples)

    def test_target_range_bin(self):
        params = RadarParams(n_range_bins=16)
        spec = SynthTargetSpec(TargetClass.REFLECTOR, 200.0, n_segments=2, range_bin=7)
        m = synth_measurement(spec, params)
        energy = np.sum(np.abs(m.samples) ** 2, axis=1)
        assert int(np.argmax(energy)) == 7

    def test_reflector_power_concentrated_around_body_line(self):
        params = RadarParams()
        body_bin = 2
        spec = SynthTargetSpec(
            TargetClass.REFLECTOR, body_bin * params.doppler_resolution_hz, n_segments=8, seed=1
        )
        power = segment_power_matrix(synth_measurement(spec, params)).sum(axis=1)
        centre = params.segment_len // 2 + body_bin
        assert power[centre - 1 : centre + 2].sum() / power.sum() > 0.99

    def test_bird_flap_periodicity(self):
        params = RadarParams()
        spec = SynthTargetSpec(TargetClass.BIRD, 500.0, 6.0, 200.0, n_segments=40, seed=2)
        power = segment_power_matrix(synth_measurement(spec, params))
        axis = doppler_axis(params.segment_len, params.prf_hz)
        centroid = axis @ power / power.sum(axis=0)
        centroid = centroid - centroid.mean()
        lags = np.arange(6, 17)
        acf = [np.dot(centroid[:-lag], centroid[lag:]) for lag in lags]
        period_columns = params.prf_hz / params.segment_len / 6.0
        assert abs(lags[int(np.argmax(acf))] - period_columns) <= 1

    def test_aliasing_guard(self):
        spec = SynthTargetSpec(TargetClass.BIRD, 8000.0, 6.0, 600.0)
        with pytest.raises(SynthesisError, match="aliases"):
            synth_measurement(spec, RadarParams())

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"kind": "bird", "micro_rate_hz": 30.0},
            {"kind": "reflector", "micro_amplitude_hz": 10.0},
            {"kind": "drone", "micro_rate_hz": -1.0},
        ],
    )
    def test_invalid_specs(self, kwargs):
        with pytest.raises(SynthesisError):
            SynthTargetSpec(**kwargs)

    def test_dataset_counts(self):
        measurements = synth_dataset(5, seed=42)
        labels = [m.label.value for m in measurements]
        assert len(measurements) == 15
        assert all(labels.count(c) == 5 for c in ("bird", "drone", "reflector"))

    def test_reference_ratio(self):
        assert reference_ratio_counts(119) == {"drone": 44, "bird": 56, "reflector": 19}
        measurements = synth_dataset(seed=42, total=119)
        labels = [m.label.value for m in measurements]
        assert (labels.count("drone"), labels.count("bird"), labels.count("reflector")) == (
            44,
            56,
            19,
        )

    def test_seed_changes_values_not_shapes(self):
        a = synth_dataset(1, seed=1)
        b = synth_dataset(1, seed=2)
        assert [m.id for m in a] == [m.id for m in b]
        assert not np.array_equal(a[0].samples, b[0].samples)
        assert a[0].samples.shape[0] == b[0].samples.shape[0]


def test_dataset_write_load_and_digest(tmp_path):
    measurements = synth_dataset(1, seed=3)
    write_dataset(measurements, tmp_path)
    loaded = load_dataset(tmp_path)
    assert [m.id for m in loaded] == sorted(m.id for m in measurements)
    originals = {m.id: m for m in measurements}
    for m in loaded:
        assert measurement_digest(m) == measurement_digest(originals[m.id])


def test_load_dataset_missing_directory(tmp_path):
    with pytest.raises(ContainerError, match="does not exist"):
        load_dataset(tmp_path / "nope")


def test_duration_summary():
    summary = duration_summary(synth_dataset(3, seed=4))
    assert list(summary.index) == ["mean", "std", "median", "p25", "p50", "p75"]
    assert set(summary.columns) == {"bird", "drone", "reflector"}
    assert (summary.loc["median"] == summary.loc["p50"]).all()
