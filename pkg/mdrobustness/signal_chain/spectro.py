"""
Measurement-level micro-Doppler spectrograms.

For every segment the range bin with the largest slow-time energy is kept, its
Doppler power spectrum is computed, and the spectra are stacked along time.
The stack is then centre-cropped or zero-padded to ``L`` columns and converted
to dB relative to its single largest bin.

DFT scaling: ``numpy.fft.fft`` without normalisation, so for a windowed,
mean-removed segment ``w`` of length N, ``sum(spectrum) == N * sum(|w|**2)``.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import windows

from mdrobustness.errors import ContainerError, DegenerateSpectrogramError
from mdrobustness.signal_chain.ingest import IQMeasurement, TargetClass

DB_FLOOR = -120.0
DEFAULT_WINDOW = 32
MIN_SEGMENT_SAMPLES = 8

_HEADER_NAME = "spectrogram.json"
_VALUES_NAME = "values.bin"


@dataclass
class Spectrogram:
    """
    dB-normalised time-frequency matrix of one measurement.

    Attributes
    ----------
    values_db : np.ndarray
        ``[F x T]`` matrix, maximum exactly 0 dB, floor at -120 dB.
    doppler_axis_hz : np.ndarray
        Length F, increasing, zero Doppler at index ``F // 2``.
    pad_mask : np.ndarray
        Length T booleans, True on zero-padded columns.
    label : TargetClass
    measurement_id : str
    """

    values_db: np.ndarray
    doppler_axis_hz: np.ndarray
    pad_mask: np.ndarray
    label: TargetClass
    measurement_id: str

    @property
    def n_freq(self) -> int:
        return int(self.values_db.shape[0])

    @property
    def n_time(self) -> int:
        return int(self.values_db.shape[1])


def doppler_axis(n: int, prf_hz: float) -> np.ndarray:
    return np.fft.fftshift(np.fft.fftfreq(n, d=1.0 / prf_hz))


def select_range_bin(m: IQMeasurement, segment: int) -> int:
    """
    Range bin with the largest accumulated slow-time energy within a segment.

    Ties go to the lowest index.
    """
    try:
        start, stop = m.segment_boundaries[segment]
    except IndexError:
        raise ContainerError(f"{m.id}: no segment {segment}") from None
    if stop <= start:
        raise ContainerError(f"{m.id}: segment {segment} is empty")
    block = m.samples[:, start:stop]
    energy = np.sum(block.real.astype(np.float64) ** 2 + block.imag.astype(np.float64) ** 2, axis=1)
    return int(np.argmax(energy))


def segment_spectrum(x) -> np.ndarray:
    """
    Centred Doppler power spectrum of one slow-time segment.

    Mean removal, symmetric Hann window ``0.5 (1 - cos(2 pi n / (N - 1)))``,
    DFT, fftshift, squared magnitude. An all-zero input gives an all-zero
    spectrum.

    Parameters
    ----------
    x : array_like
        Complex slow-time samples, at least 8 long.

    Returns
    -------
    np.ndarray
        Linear power, same length as ``x``, zero Doppler at index ``len(x) // 2``.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1 or x.size < MIN_SEGMENT_SAMPLES:
        raise ValueError(f"segment must be a vector of at least {MIN_SEGMENT_SAMPLES} samples")
    windowed = (x - x.mean()) * windows.hann(x.size, sym=True)
    spectrum = np.fft.fftshift(np.fft.fft(windowed))
    return spectrum.real**2 + spectrum.imag**2


def standardize_columns(power: np.ndarray, L: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Centre-crop or zero-pad a ``[F x T]`` matrix to exactly ``L`` columns.

    Odd remainders put the extra column on the trailing side, both when
    cropping and when padding.
    """
    n_freq, n_time = power.shape
    if n_time >= L:
        start = (n_time - L) // 2
        return power[:, start : start + L], np.zeros(L, dtype=bool)
    lead = (L - n_time) // 2
    padded = np.zeros((n_freq, L), dtype=power.dtype)
    padded[:, lead : lead + n_time] = power
    pad_mask = np.ones(L, dtype=bool)
    pad_mask[lead : lead + n_time] = False
    return padded, pad_mask


def to_db(power: np.ndarray) -> np.ndarray:
    """``10 log10(power / max)`` floored at -120 dB; the maximum maps to exactly 0."""
    peak = power.max()
    if not peak > 0:
        raise DegenerateSpectrogramError("spectrogram has no energy")
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(power / peak)
    return np.maximum(db, DB_FLOOR)


def segment_power_matrix(m: IQMeasurement) -> np.ndarray:
    """Stack of per-segment spectra, ``[segment_len x n_segments]``, linear power."""
    columns = []
    for k, (start, stop) in enumerate(m.segment_boundaries):
        r = select_range_bin(m, k)
        columns.append(segment_spectrum(m.samples[r, start:stop]))
    return np.column_stack(columns)


def build_spectrogram(m: IQMeasurement, L: int = DEFAULT_WINDOW) -> Spectrogram:
    """
    Measurement-level dB-normalised spectrogram with exactly ``L`` columns.

    Raises
    ------
    DegenerateSpectrogramError
        If the standardised spectrogram carries no energy.
    """
    if L < 2:
        raise ValueError(f"L must be at least 2, got {L}")
    power, pad_mask = standardize_columns(segment_power_matrix(m), L)
    try:
        values_db = to_db(power)
    except DegenerateSpectrogramError:
        raise DegenerateSpectrogramError(f"{m.id}: spectrogram has no energy") from None
    return Spectrogram(
        values_db=values_db,
        doppler_axis_hz=doppler_axis(power.shape[0], m.params.prf_hz),
        pad_mask=pad_mask,
        label=TargetClass.parse(m.label),
        measurement_id=m.id,
    )


def write_spectrogram(s: Spectrogram, path) -> None:
    """Dump a spectrogram as a JSON header plus a row-major little-endian float32 matrix."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    header = {
        "measurement_id": s.measurement_id,
        "label": TargetClass.parse(s.label).value,
        "shape": [s.n_freq, s.n_time],
        "doppler_axis_hz": [float(f) for f in s.doppler_axis_hz],
        "pad_mask": [bool(p) for p in s.pad_mask],
        "dtype": "float32",
        "endianness": "little",
    }
    with open(path / _HEADER_NAME, "w") as f:
        json.dump(header, f, indent=2)
    np.ascontiguousarray(s.values_db, dtype="<f4").tofile(path / _VALUES_NAME)


def read_spectrogram(path) -> Spectrogram:
    path = Path(path)
    with open(path / _HEADER_NAME, "r") as f:
        header = json.load(f)
    n_freq, n_time = header["shape"]
    values = np.fromfile(path / _VALUES_NAME, dtype="<f4")
    if values.size != n_freq * n_time:
        raise ContainerError(f"{path}: spectrogram payload does not match header shape")
    return Spectrogram(
        values_db=values.astype(np.float64).reshape(n_freq, n_time),
        doppler_axis_hz=np.asarray(header["doppler_axis_hz"], dtype=np.float64),
        pad_mask=np.asarray(header["pad_mask"], dtype=bool),
        label=TargetClass.parse(header["label"]),
        measurement_id=header["measurement_id"],
    )
