"""
Measurement containers and the synthetic target generator.

A container is a directory holding ``manifest.json`` (id, label, radar
parameters, segment boundaries, dtype, endianness) and ``iq.bin`` (interleaved
I/Q floats, row-major ``[range x slow-time]``).
"""

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from mdrobustness.errors import ContainerError, SynthesisError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
PAYLOAD_NAME = "iq.bin"
CONTAINER_VERSION = 1

# relative power of the complex white floor added to every synthetic cube
SYNTH_FLOOR_DB = -60.0
DRONE_HARMONICS = 3

# 44 drone, 56 bird and 19 reflector spectrograms
REFERENCE_CLASS_COUNTS = {"drone": 44, "bird": 56, "reflector": 19}

_FLOAT_DTYPES = {"float32": np.dtype("<f4"), "float64": np.dtype("<f8")}
_COMPLEX_FOR_FLOAT = {"float32": np.complex64, "float64": np.complex128}
_NATIVE_FLOAT = {"float32": np.float32, "float64": np.float64}


class TargetClass(str, Enum):
    BIRD = "bird"
    DRONE = "drone"
    REFLECTOR = "reflector"

    @classmethod
    def parse(cls, value) -> "TargetClass":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ContainerError(f"unknown class label '{value}'") from None


@dataclass(frozen=True)
class RadarParams:
    """
    Radar acquisition parameters shared by all segments of a measurement.

    Defaults describe a 77 GHz FMCW sensor; 256 slow-time samples per segment
    give roughly 66 Hz Doppler resolution at 17 kHz PRF.
    """

    center_freq_hz: float = 77e9
    prf_hz: float = 17e3
    range_resolution_m: float = 1.0
    n_range_bins: int = 4
    segment_len: int = 256

    def __post_init__(self):
        if not self.prf_hz > 0:
            raise ContainerError(f"prf_hz must be positive, got {self.prf_hz}")
        if self.segment_len < 8:
            raise ContainerError(f"segment_len must be at least 8, got {self.segment_len}")
        if self.n_range_bins < 1:
            raise ContainerError(f"n_range_bins must be at least 1, got {self.n_range_bins}")

    @property
    def doppler_resolution_hz(self) -> float:
        return self.prf_hz / self.segment_len


@dataclass
class IQMeasurement:
    """
    Complex radar cube ``[n_range_bins x n_slow_time]`` for one recorded target.

    Attributes
    ----------
    id : str
        Measurement identifier, unique within a dataset.
    label : TargetClass
        One of drone, bird, reflector.
    params : RadarParams
        Acquisition parameters.
    samples : np.ndarray
        Complex matrix, complex64 as recorded or complex128 after noise injection.
    segment_boundaries : list of tuple
        Half-open ``(start, stop)`` slow-time index ranges, contiguous from 0.
    """

    id: str
    label: TargetClass
    params: RadarParams
    samples: np.ndarray
    segment_boundaries: list = field(default_factory=list)

    @property
    def n_slow_time(self) -> int:
        return int(self.samples.shape[1])

    @property
    def n_segments(self) -> int:
        return len(self.segment_boundaries)

    @property
    def duration_s(self) -> float:
        return self.n_slow_time / self.params.prf_hz

    def with_samples(self, samples: np.ndarray) -> "IQMeasurement":
        return IQMeasurement(
            id=self.id,
            label=self.label,
            params=self.params,
            samples=samples,
            segment_boundaries=list(self.segment_boundaries),
        )


@dataclass(frozen=True)
class SynthTargetSpec:
    kind: TargetClass
    body_doppler_hz: float = 0.0
    micro_rate_hz: float = 0.0
    micro_amplitude_hz: float = 0.0
    n_segments: int = 40
    seed: int = 0
    range_bin: int | None = None

    def __post_init__(self):
        kind = TargetClass.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.micro_rate_hz < 0:
            raise SynthesisError(f"micro_rate_hz must be >= 0, got {self.micro_rate_hz}")
        if kind is TargetClass.BIRD and not 1 <= self.micro_rate_hz <= 20:
            raise SynthesisError(
                f"bird flap rate must lie in [1, 20] Hz, got {self.micro_rate_hz}"
            )
        if kind is TargetClass.REFLECTOR and self.micro_amplitude_hz != 0:
            raise SynthesisError("reflector targets carry no micro-Doppler amplitude")
        if self.n_segments < 1:
            raise SynthesisError(f"n_segments must be >= 1, got {self.n_segments}")

    @property
    def excursion_hz(self) -> float:
        """Largest Doppler offset from the body line produced by the micro-motion."""
        if self.kind is TargetClass.DRONE:
            return DRONE_HARMONICS * self.micro_rate_hz
        return abs(self.micro_amplitude_hz)


def contiguous_segments(n_segments: int, segment_len: int) -> list[tuple[int, int]]:
    return [(k * segment_len, (k + 1) * segment_len) for k in range(n_segments)]


def validate_measurement(m: IQMeasurement) -> IQMeasurement:
    """
    Check every structural invariant of a measurement.

    Raises
    ------
    ContainerError
        On a non-complex or wrongly shaped cube, an empty or non-contiguous
        segment list, a segment whose length differs from ``segment_len``, or
        non-finite samples.
    """
    TargetClass.parse(m.label)
    samples = m.samples
    if not isinstance(samples, np.ndarray) or samples.ndim != 2:
        raise ContainerError(f"{m.id}: samples must be a 2-D array")
    if not np.iscomplexobj(samples):
        raise ContainerError(f"{m.id}: samples must be complex")
    if samples.shape[0] != m.params.n_range_bins:
        raise ContainerError(
            f"{m.id}: dimension mismatch, {samples.shape[0]} range bins in samples but "
            f"params declare {m.params.n_range_bins}"
        )
    if not m.segment_boundaries:
        raise ContainerError(f"{m.id}: segment list is empty")

    expected_start = 0
    for start, stop in m.segment_boundaries:
        if start != expected_start:
            raise ContainerError(f"{m.id}: segments must be contiguous from index 0")
        if stop - start != m.params.segment_len:
            raise ContainerError(
                f"{m.id}: segment ({start}, {stop}) length differs from "
                f"segment_len={m.params.segment_len}"
            )
        expected_start = stop
    if expected_start != samples.shape[1]:
        raise ContainerError(
            f"{m.id}: dimension mismatch, segments cover {expected_start} slow-time samples "
            f"but samples hold {samples.shape[1]}"
        )
    if not np.isfinite(samples).all():
        raise ContainerError(f"{m.id}: non-finite samples")
    return m


def _manifest_dict(m: IQMeasurement, float_name: str) -> dict:
    return {
        "container_version": CONTAINER_VERSION,
        "id": m.id,
        "label": TargetClass.parse(m.label).value,
        "params": asdict(m.params),
        "n_range_bins": int(m.samples.shape[0]),
        "n_slow_time": int(m.samples.shape[1]),
        "segment_boundaries": [[int(a), int(b)] for a, b in m.segment_boundaries],
        "dtype": float_name,
        "endianness": "little",
    }


def _float_name_for(samples: np.ndarray) -> str:
    return "float32" if samples.dtype == np.complex64 else "float64"


def write_measurement(m: IQMeasurement, path) -> None:
    """
    Write a measurement container, validating it first.

    complex64 cubes are stored as little-endian float32 pairs; anything wider is
    stored as float64 so that loading reproduces the array bit for bit.
    """
    validate_measurement(m)
    path = Path(path)
    float_name = _float_name_for(m.samples)
    complex_dtype = _COMPLEX_FOR_FLOAT[float_name]
    payload = np.ascontiguousarray(m.samples.astype(complex_dtype, copy=False))
    interleaved = payload.view(payload.real.dtype).astype(_FLOAT_DTYPES[float_name])
    try:
        path.mkdir(parents=True, exist_ok=True)
        with open(path / MANIFEST_NAME, "w") as f:
            json.dump(_manifest_dict(m, float_name), f, indent=2, sort_keys=True)
        interleaved.tofile(path / PAYLOAD_NAME)
    except OSError as e:
        raise ContainerError(f"could not write container {path}: {e}") from e


def load_measurement(path) -> IQMeasurement:
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ContainerError(f"missing manifest in {path}")
    with open(manifest_path, "r") as f:
        manifest = json.load(f)

    required = ["id", "label", "params", "n_range_bins", "n_slow_time", "segment_boundaries"]
    missing = [key for key in required if key not in manifest]
    if missing:
        raise ContainerError(f"{manifest_path}: manifest missing fields {missing}")

    float_name = manifest.get("dtype", "float32")
    if float_name not in _FLOAT_DTYPES:
        raise ContainerError(f"{manifest_path}: unsupported dtype '{float_name}'")
    if manifest.get("endianness", "little") != "little":
        raise ContainerError(f"{manifest_path}: only little-endian payloads are supported")

    label = TargetClass.parse(manifest["label"])
    params = RadarParams(**manifest["params"])
    n_range, n_slow = int(manifest["n_range_bins"]), int(manifest["n_slow_time"])

    payload_path = path / PAYLOAD_NAME
    if not payload_path.is_file():
        raise ContainerError(f"missing payload {payload_path}")
    raw = np.fromfile(payload_path, dtype=_FLOAT_DTYPES[float_name])
    if raw.size != 2 * n_range * n_slow:
        raise ContainerError(
            f"{path}: dimension mismatch, manifest declares {n_range} x {n_slow} complex "
            f"samples ({2 * n_range * n_slow} floats) but payload holds {raw.size}"
        )
    native = raw.astype(_NATIVE_FLOAT[float_name])
    samples = native.view(_COMPLEX_FOR_FLOAT[float_name]).reshape(n_range, n_slow)

    m = IQMeasurement(
        id=str(manifest["id"]),
        label=label,
        params=params,
        samples=samples,
        segment_boundaries=[(int(a), int(b)) for a, b in manifest["segment_boundaries"]],
    )
    return validate_measurement(m)


class MeasurementReader:
    """
    Registry of measurement readers keyed by on-disk format name.

    Readers take a path and return an ``IQMeasurement``; registering a reader
    for a foreign dataset layout makes it usable by every command.

    Methods
    -------
    __init__(self, format, reader_function):
        Registers a reader for a format.
    load(cls, path, format="container"):
        Reads a measurement using the registered reader.
    """

    format_dictionary = {}

    def __init__(self, format, reader_function):
        type(self).format_dictionary[format] = reader_function

    @classmethod
    def load(cls, path, format="container"):
        if format not in cls.format_dictionary:
            raise ValueError(f"Format '{format}' is not supported.")
        return cls.format_dictionary[format](path)


MeasurementReader("container", load_measurement)


def discover_containers(root) -> list[Path]:
    root = Path(root)
    if not root.is_dir():
        raise ContainerError(f"dataset directory {root} does not exist")
    return sorted(p.parent for p in root.glob(f"*/{MANIFEST_NAME}"))


def load_dataset(root, format="container") -> list[IQMeasurement]:
    """Load every container found directly below ``root``, ordered by id."""
    measurements = [MeasurementReader.load(p, format) for p in discover_containers(root)]
    logger.info("loaded %d measurements from %s", len(measurements), root)
    return sorted(measurements, key=lambda m: m.id)


def write_dataset(measurements, root) -> list[Path]:
    root = Path(root)
    paths = []
    for m in measurements:
        target = root / m.id
        write_measurement(m, target)
        paths.append(target)
    return paths


def measurement_digest(m: IQMeasurement) -> str:
    """Content hash over metadata and sample bytes."""
    h = hashlib.blake2b(digest_size=16)
    h.update(json.dumps(_manifest_dict(m, _float_name_for(m.samples)), sort_keys=True).encode())
    h.update(np.ascontiguousarray(m.samples).tobytes())
    return h.hexdigest()


def duration_summary(measurements) -> pd.DataFrame:
    """Per-class measurement duration statistics in seconds."""
    frame = pd.DataFrame(
        {
            "label": [TargetClass.parse(m.label).value for m in measurements],
            "duration_s": [m.duration_s for m in measurements],
        }
    )
    grouped = frame.groupby("label")["duration_s"]
    summary = pd.DataFrame(
        {
            "mean": grouped.mean(),
            "std": grouped.std(ddof=0),
            "median": grouped.median(),
            "p25": grouped.quantile(0.25),
            "p50": grouped.quantile(0.50),
            "p75": grouped.quantile(0.75),
        }
    )
    return summary.T


def _synth_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def synth_measurement(spec: SynthTargetSpec, params: RadarParams, id: str | None = None):
    """
    Synthesise a physics-plausible IQ cube for one target.

    Reflectors are a single tone at the body Doppler. Birds are a sinusoidal FM
    tone ``exp(j(2 pi f_b t + (A / f_flap) sin(2 pi f_flap t)))``. Drones are the
    body tone amplitude-modulated by a blade-flash comb
    ``1 + sum_k (0.5 / k) cos(2 pi k f_rotor t)`` for k = 1..3, which puts
    symmetric sidelobes at ``f_b +- k f_rotor``. Every range bin gets a complex
    white floor 60 dB below the tone; the target sits in one range bin.

    Parameters
    ----------
    spec : SynthTargetSpec
        Target description, including the seed.
    params : RadarParams
        Acquisition parameters.
    id : str, optional
        Measurement id; derived from kind and seed when omitted.

    Returns
    -------
    IQMeasurement
        complex64 cube, deterministic for a fixed ``(spec, params)``.

    Raises
    ------
    SynthesisError
        If the body line plus micro-Doppler excursion reaches PRF / 2.
    """
    nyquist = params.prf_hz / 2
    if abs(spec.body_doppler_hz) + spec.excursion_hz >= nyquist:
        raise SynthesisError(
            f"Doppler extent {abs(spec.body_doppler_hz) + spec.excursion_hz:.1f} Hz "
            f"aliases at PRF/2 = {nyquist:.1f} Hz"
        )
    target_bin = params.n_range_bins // 2 if spec.range_bin is None else spec.range_bin
    if not 0 <= target_bin < params.n_range_bins:
        raise SynthesisError(f"range_bin {target_bin} outside [0, {params.n_range_bins})")

    rng = _synth_rng(spec.seed)
    n = spec.n_segments * params.segment_len
    t = np.arange(n) / params.prf_hz
    phase0 = rng.uniform(0, 2 * np.pi)
    carrier = np.exp(1j * (2 * np.pi * spec.body_doppler_hz * t + phase0))

    if spec.kind is TargetClass.REFLECTOR:
        echo = carrier
    elif spec.kind is TargetClass.BIRD:
        fm = (spec.micro_amplitude_hz / spec.micro_rate_hz) * np.sin(
            2 * np.pi * spec.micro_rate_hz * t
        )
        echo = carrier * np.exp(1j * fm)
    else:
        envelope = np.ones(n)
        for k in range(1, DRONE_HARMONICS + 1):
            envelope += (0.5 / k) * np.cos(2 * np.pi * k * spec.micro_rate_hz * t)
        echo = carrier * envelope

    floor_power = 10 ** (SYNTH_FLOOR_DB / 10)
    cube = math.sqrt(floor_power / 2) * (
        rng.standard_normal((params.n_range_bins, n))
        + 1j * rng.standard_normal((params.n_range_bins, n))
    )
    cube[target_bin] += echo

    m = IQMeasurement(
        id=id if id is not None else f"{spec.kind.value}_{spec.seed}",
        label=spec.kind,
        params=params,
        samples=cube.astype(np.complex64),
        segment_boundaries=contiguous_segments(spec.n_segments, params.segment_len),
    )
    return validate_measurement(m)


def reference_ratio_counts(total: int) -> dict[str, int]:
    """Split ``total`` in the 44:56:19 drone:bird:reflector ratio (largest remainder)."""
    if total < len(REFERENCE_CLASS_COUNTS):
        raise ValueError(f"total must be at least {len(REFERENCE_CLASS_COUNTS)}, got {total}")
    weight = sum(REFERENCE_CLASS_COUNTS.values())
    exact = {k: total * v / weight for k, v in REFERENCE_CLASS_COUNTS.items()}
    counts = {k: int(math.floor(v)) for k, v in exact.items()}
    remainder = total - sum(counts.values())
    by_fraction = sorted(exact, key=lambda k: (-(exact[k] - counts[k]), k))
    for k in by_fraction[:remainder]:
        counts[k] += 1
    return counts


def _jittered_spec(kind: TargetClass, rng: np.random.Generator, params: RadarParams):
    bin_hz = params.doppler_resolution_hz
    sign = 1.0 if rng.random() < 0.5 else -1.0
    if kind is TargetClass.REFLECTOR:
        return SynthTargetSpec(
            kind=kind,
            body_doppler_hz=sign * bin_hz * int(rng.integers(1, 4)),
            n_segments=int(rng.integers(10, 31)),
            seed=int(rng.integers(0, 2**63)),
        )
    if kind is TargetClass.BIRD:
        return SynthTargetSpec(
            kind=kind,
            body_doppler_hz=sign * rng.uniform(300.0, 900.0),
            micro_rate_hz=rng.uniform(4.0, 8.0),
            micro_amplitude_hz=rng.uniform(150.0, 300.0),
            n_segments=int(rng.integers(12, 41)),
            seed=int(rng.integers(0, 2**63)),
        )
    rate = rng.uniform(1400.0, 2400.0)
    return SynthTargetSpec(
        kind=kind,
        body_doppler_hz=rng.uniform(-400.0, 400.0),
        micro_rate_hz=rate,
        micro_amplitude_hz=DRONE_HARMONICS * rate,
        n_segments=int(rng.integers(36, 81)),
        seed=int(rng.integers(0, 2**63)),
    )


def synth_dataset(
    n_per_class: int | None = None,
    seed: int = 42,
    params: RadarParams | None = None,
    *,
    total: int | None = None,
) -> list[IQMeasurement]:
    """
    Synthesise a labelled dataset.

    Either ``n_per_class`` measurements of every class, or, when ``total`` is
    given, ``total`` measurements in the 44:56:19 drone:bird:reflector
    ratio. Body Doppler, micro-motion rate and amplitude, and duration are
    jittered per measurement from ``seed``.
    """
    params = params if params is not None else RadarParams()
    if total is not None:
        counts = reference_ratio_counts(total)
    else:
        if n_per_class is None or n_per_class < 1:
            raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
        counts = {kind.value: n_per_class for kind in TargetClass}

    measurements = []
    for class_index, kind in enumerate(TargetClass):
        for i in range(counts[kind.value]):
            rng = _synth_rng_for(seed, class_index, i)
            spec = _jittered_spec(kind, rng, params)
            measurements.append(synth_measurement(spec, params, id=f"{kind.value}_{i:03d}"))
    logger.info("synthesised %d measurements %s", len(measurements), counts)
    return measurements


def _synth_rng_for(seed: int, class_index: int, i: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([int(seed), class_index, i]))
    )
