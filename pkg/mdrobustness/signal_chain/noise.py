"""
AWGN, phase noise and their combination, applied to raw IQ before any
spectrogram is formed.

Random streams are counter-based (Philox) and keyed by the master seed, the
measurement id and a stage tag, so the noise a measurement receives does not
depend on the order or process in which measurements are corrupted.
"""

import hashlib
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from mdrobustness.errors import NoiseInjectionError, NoiseSpecError
from mdrobustness.signal_chain.ingest import IQMeasurement
from mdrobustness.signal_chain.spectro import select_range_bin

AWGN_GRID_DB = (-10, -7, -5, -3, -2, -1, 0, 1, 2, 3, 5, 7, 10)
PHASE_GRID_DEG = tuple(range(1, 11))

_USAGE = "expected mode[:p1[:p2]], e.g. raw, awgn:-5, phase:7, combined:-1:3"


class NoiseMode(str, Enum):
    RAW = "raw"
    AWGN = "awgn"
    PHASE = "phase"
    COMBINED = "combined"


class Severity(str, Enum):
    NONE = "none"
    MILD = "mild"
    MODERATE = "moderate"
    SEVERE = "severe"


_SEVERITY_RANK = {Severity.NONE: 0, Severity.MILD: 1, Severity.MODERATE: 2, Severity.SEVERE: 3}

# (snr_db, phase_deg) -> tier for the nine combined conditions
COMBINED_TIERS = {
    (-3, 1): Severity.MILD,
    (-2, 2): Severity.MILD,
    (-1, 3): Severity.MODERATE,
    (0, 4): Severity.MODERATE,
    (1, 5): Severity.MODERATE,
    (7, 1): Severity.MODERATE,
    (2, 6): Severity.SEVERE,
    (3, 7): Severity.SEVERE,
    (5, 8): Severity.SEVERE,
}


def awgn_severity(snr_db: float) -> Severity:
    if snr_db < -5:
        return Severity.SEVERE
    if snr_db < 5:
        return Severity.MODERATE
    return Severity.MILD


def phase_severity(phase_deg: float) -> Severity:
    if phase_deg <= 3:
        return Severity.MILD
    if phase_deg <= 7:
        return Severity.MODERATE
    return Severity.SEVERE


def combined_severity(snr_db: float, phase_deg: float) -> Severity:
    tier = COMBINED_TIERS.get((snr_db, phase_deg))
    if tier is not None:
        return tier
    return max(awgn_severity(snr_db), phase_severity(phase_deg), key=_SEVERITY_RANK.get)


def _format_number(value: float) -> str:
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


@dataclass(frozen=True)
class NoiseSpec:
    """
    One noise condition.

    ``severity`` is derived from the parameters when not given.
    """

    mode: NoiseMode
    snr_db: float | None = None
    phase_deg: float | None = None
    severity: Severity | None = None
    seed: int = 0

    def __post_init__(self):
        try:
            mode = NoiseMode(self.mode)
        except ValueError:
            raise NoiseSpecError(f"unknown noise mode '{self.mode}'; {_USAGE}") from None
        object.__setattr__(self, "mode", mode)

        needs_snr = mode in (NoiseMode.AWGN, NoiseMode.COMBINED)
        needs_phase = mode in (NoiseMode.PHASE, NoiseMode.COMBINED)
        if needs_snr != (self.snr_db is not None):
            raise NoiseSpecError(
                f"{mode.value} noise {'requires' if needs_snr else 'takes no'} snr_db"
            )
        if needs_phase != (self.phase_deg is not None):
            raise NoiseSpecError(
                f"{mode.value} noise {'requires' if needs_phase else 'takes no'} phase_deg"
            )
        if self.phase_deg is not None and self.phase_deg < 0:
            raise NoiseSpecError(f"phase_deg must be >= 0, got {self.phase_deg}")
        for value in (self.snr_db, self.phase_deg):
            if value is not None and not math.isfinite(value):
                raise NoiseSpecError("noise parameters must be finite")

        if self.severity is None:
            severity = {
                NoiseMode.RAW: lambda: Severity.NONE,
                NoiseMode.AWGN: lambda: awgn_severity(self.snr_db),
                NoiseMode.PHASE: lambda: phase_severity(self.phase_deg),
                NoiseMode.COMBINED: lambda: combined_severity(self.snr_db, self.phase_deg),
            }[mode]()
        else:
            severity = Severity(self.severity)
        object.__setattr__(self, "severity", severity)

    def __str__(self):
        return ":".join([self.mode.value] + self.param_label.split(":")).rstrip(":")

    @property
    def param_label(self) -> str:
        """Parameter part of the string form, empty for raw data."""
        params = [p for p in (self.snr_db, self.phase_deg) if p is not None]
        return ":".join(_format_number(p) for p in params)

    def with_seed(self, seed: int) -> "NoiseSpec":
        return replace(self, seed=int(seed))


def parse_noise_spec(text: str, seed: int = 0) -> NoiseSpec:
    """
    Parse the ``mode[:p1[:p2]]`` form: ``raw``, ``awgn:<snr_db>``,
    ``phase:<deg>``, ``combined:<snr_db>:<deg>``.
    """
    parts = str(text).strip().lower().split(":")
    mode, args = parts[0], parts[1:]
    try:
        values = [float(a) for a in args]
    except ValueError:
        raise NoiseSpecError(f"malformed noise spec '{text}'; {_USAGE}") from None
    arity = {"raw": 0, "awgn": 1, "phase": 1, "combined": 2}
    if mode not in arity:
        raise NoiseSpecError(f"unknown noise mode '{mode}'; {_USAGE}")
    if len(values) != arity[mode]:
        raise NoiseSpecError(f"malformed noise spec '{text}'; {_USAGE}")
    if mode == "awgn":
        return NoiseSpec(NoiseMode.AWGN, snr_db=values[0], seed=seed)
    if mode == "phase":
        return NoiseSpec(NoiseMode.PHASE, phase_deg=values[0], seed=seed)
    if mode == "combined":
        return NoiseSpec(NoiseMode.COMBINED, snr_db=values[0], phase_deg=values[1], seed=seed)
    return NoiseSpec(NoiseMode.RAW, seed=seed)


def noise_schedule(seed: int = 42) -> list[NoiseSpec]:
    """Raw, thirteen AWGN levels, ten phase levels and nine combined pairs (33 conditions)."""
    schedule = [NoiseSpec(NoiseMode.RAW, seed=seed)]
    schedule += [NoiseSpec(NoiseMode.AWGN, snr_db=float(s), seed=seed) for s in AWGN_GRID_DB]
    schedule += [NoiseSpec(NoiseMode.PHASE, phase_deg=float(p), seed=seed) for p in PHASE_GRID_DEG]
    schedule += [
        NoiseSpec(NoiseMode.COMBINED, snr_db=float(s), phase_deg=float(p), severity=tier, seed=seed)
        for (s, p), tier in COMBINED_TIERS.items()
    ]
    return schedule


def _tag_word(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def stage_rng(seed: int, measurement_id: str, stage: str) -> np.random.Generator:
    """Independent Philox stream for one (seed, measurement, stage) triple."""
    entropy = [int(seed), _tag_word(measurement_id), _tag_word(stage)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def awgn_variance(p_signal: float, snr_db: float) -> float:
    return 10 ** (-snr_db / 10) * p_signal


def awgn_inject(m: IQMeasurement, snr_db: float, seed: int) -> IQMeasurement:
    """
    Add circular complex Gaussian noise calibrated per segment.

    ``P_signal`` is the mean power of the segment's selected range bin; every
    sample of the segment (all range bins) receives noise of total variance
    ``10**(-snr_db/10) * P_signal``, split evenly over I and Q.

    Raises
    ------
    NoiseInjectionError
        If a segment's selected signal has zero power.
    """
    x = m.samples.astype(np.complex128)
    rng = stage_rng(seed, m.id, "awgn")
    unit = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
    out = x.copy()
    for k, (start, stop) in enumerate(m.segment_boundaries):
        signal = x[select_range_bin(m, k), start:stop]
        p_signal = float(np.mean(signal.real**2 + signal.imag**2))
        if p_signal == 0:
            raise NoiseInjectionError(f"{m.id}: segment {k} has zero signal power")
        sigma2 = awgn_variance(p_signal, snr_db)
        out[:, start:stop] += math.sqrt(sigma2 / 2) * unit[:, start:stop]
    return m.with_samples(out)


def phase_inject(m: IQMeasurement, phase_deg: float, seed: int) -> IQMeasurement:
    """Multiply every sample by ``exp(j phi)``, ``phi ~ N(0, radians(phase_deg)**2)`` i.i.d."""
    if phase_deg < 0:
        raise NoiseSpecError(f"phase_deg must be >= 0, got {phase_deg}")
    x = m.samples.astype(np.complex128)
    if phase_deg == 0:
        return m.with_samples(x)
    rng = stage_rng(seed, m.id, "phase")
    phi = rng.normal(0.0, math.radians(phase_deg), size=x.shape)
    return m.with_samples(x * np.exp(1j * phi))


def combined_inject(m: IQMeasurement, snr_db: float, phase_deg: float, seed: int):
    """Phase noise first, then AWGN calibrated against the (power-preserved) result."""
    phase_child, awgn_child = np.random.SeedSequence([int(seed), _tag_word("combined")]).spawn(2)
    phase_seed = int(phase_child.generate_state(1, dtype=np.uint64)[0])
    awgn_seed = int(awgn_child.generate_state(1, dtype=np.uint64)[0])
    return awgn_inject(phase_inject(m, phase_deg, phase_seed), snr_db, awgn_seed)


def apply_noise(m: IQMeasurement, spec: NoiseSpec) -> IQMeasurement:
    if spec.mode is NoiseMode.RAW:
        return m
    if spec.mode is NoiseMode.AWGN:
        return awgn_inject(m, spec.snr_db, spec.seed)
    if spec.mode is NoiseMode.PHASE:
        return phase_inject(m, spec.phase_deg, spec.seed)
    return combined_inject(m, spec.snr_db, spec.phase_deg, spec.seed)
