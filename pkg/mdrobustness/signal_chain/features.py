"""
The ten handcrafted spectrogram descriptors.

Every feature is computed from one ``MarginalSet``: the dB spectrogram is
linearised (``P = 10 ** (S / 10)``), pad columns are dropped, and the frequency
and time marginals are formed and normalised into probability mass functions.
Entropies are in nats unless ``FeatureConfig.entropy_base`` says otherwise.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import entr

from mdrobustness.errors import FeatureError
from mdrobustness.signal_chain.spectro import DB_FLOOR, Spectrogram

FEATURE_NAMES = (
    "sler",
    "sidelobe_entropy",
    "spectral_entropy",
    "temporal_entropy",
    "temporal_energy_variance",
    "doppler_bw_p80",
    "doppler_spread",
    "zero_doppler_ratio",
    "skewness",
    "kurtosis",
)

SIDELOBE_DEGENERATE = "sidelobe_degenerate"
MOMENTS_DEGENERATE = "moments_degenerate"

_PMF_TOLERANCE = 1e-6


@dataclass(frozen=True)
class FeatureConfig:
    """
    Parameters of feature extraction.

    Attributes
    ----------
    alpha : float
        Fraction of the Doppler bins forming the central band split off by
        ``sler`` and ``sidelobe_entropy``.
    beta : float
        Fraction of the Doppler bins forming the zero-Doppler window.
    entropy_base : float, optional
        Logarithm base of the entropies; natural log when None.
    pad_threshold : float
        A column whose linear energy is below this fraction of the largest
        column energy counts as padding.
    """

    alpha: float = 0.15
    beta: float = 0.05
    entropy_base: float | None = None
    pad_threshold: float = 1e-10

    def __post_init__(self):
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise FeatureError(f"{name} must lie in (0, 1), got {value}")
        if self.entropy_base is not None and (self.entropy_base <= 0 or self.entropy_base == 1):
            raise FeatureError(f"entropy_base must be positive and not 1, got {self.entropy_base}")
        if not self.pad_threshold >= 0:
            raise FeatureError("pad_threshold must be non-negative")


@dataclass(frozen=True)
class MarginalSet:
    p_lin: np.ndarray
    p_f: np.ndarray
    p_t: np.ndarray
    p_tot: float
    pf_norm: np.ndarray
    pt_norm: np.ndarray

    @property
    def n_freq(self) -> int:
        return int(self.p_f.size)


@dataclass(frozen=True)
class FeatureVector:
    sler: float
    sidelobe_entropy: float
    spectral_entropy: float
    temporal_entropy: float
    temporal_energy_variance: float
    doppler_bw_p80: float
    doppler_spread: float
    zero_doppler_ratio: float
    skewness: float
    kurtosis: float
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in FEATURE_NAMES}

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64)


def detect_pad_columns(values_db: np.ndarray, threshold: float = 1e-10) -> np.ndarray:
    """
    Columns whose energy is negligible against the strongest column.

    Floor values (``<= -120 dB``) carry no energy here, so a column made only
    of the floor is always detected regardless of the number of Doppler bins.
    """
    values_db = np.asarray(values_db, dtype=np.float64)
    linear = np.where(values_db <= DB_FLOOR, 0.0, 10.0 ** (values_db / 10.0))
    energy = linear.sum(axis=0)
    peak = energy.max() if energy.size else 0.0
    if peak <= 0:
        return np.ones(values_db.shape[1], dtype=bool)
    return energy < threshold * peak


def marginal_set(p_lin: np.ndarray) -> MarginalSet:
    """Marginals and their pmfs for a linear power matrix ``[F x T']``."""
    p_lin = np.asarray(p_lin, dtype=np.float64)
    if p_lin.ndim != 2 or p_lin.shape[1] == 0:
        raise FeatureError("spectrogram has no usable (non-pad) columns")
    if np.any(p_lin < 0) or not np.all(np.isfinite(p_lin)):
        raise FeatureError("linear power must be finite and non-negative")
    p_f = p_lin.sum(axis=1)
    p_t = p_lin.sum(axis=0)
    p_tot = float(p_f.sum())
    if not p_tot > 0:
        raise FeatureError("spectrogram carries no energy")
    return MarginalSet(
        p_lin=p_lin, p_f=p_f, p_t=p_t, p_tot=p_tot, pf_norm=p_f / p_tot, pt_norm=p_t / p_t.sum()
    )


def marginals(s: Spectrogram, pad_threshold: float = 1e-10) -> MarginalSet:
    """
    Linearise a spectrogram and form its marginals, excluding pad columns.

    A column is padding when the spectrogram's ``pad_mask`` says so or when
    ``detect_pad_columns`` finds it empty.

    Raises
    ------
    FeatureError
        If every column is padding.
    """
    pad = np.asarray(s.pad_mask, dtype=bool) | detect_pad_columns(s.values_db, pad_threshold)
    if pad.all():
        raise FeatureError(f"{s.measurement_id}: all spectrogram columns are padded")
    return marginal_set(10.0 ** (np.asarray(s.values_db, dtype=np.float64)[:, ~pad] / 10.0))


def shannon_entropy(p, base: float | None = None) -> float:
    """
    ``-sum(p ln p)`` with ``0 ln 0 = 0``.

    Parameters
    ----------
    p : array_like
        Probability mass function, entries >= 0 summing to 1 within 1e-6.
    base : float, optional
        Logarithm base; natural log by default.

    Returns
    -------
    float
        Entropy in nats, or in units of ``base``.

    Raises
    ------
    FeatureError
        If ``p`` has negative entries or does not sum to one.
    """
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0):
        raise FeatureError("pmf has negative entries")
    if abs(p.sum() - 1.0) > _PMF_TOLERANCE:
        raise FeatureError(f"pmf sums to {p.sum()!r}, not 1")
    h = float(entr(p).sum())
    return h / math.log(base) if base is not None else h


def central_band(F: int, alpha: float) -> np.ndarray:
    """
    Indices of the ``clamp(round(alpha * F), 1, F)`` bins around zero Doppler.

    The band is centred on bin ``F // 2``; when its width is even the extra
    bin goes to the higher-frequency side. Halves round up.
    """
    if not 0 < alpha < 1:
        raise FeatureError(f"alpha must lie in (0, 1), got {alpha}")
    c = min(max(1, math.floor(alpha * F + 0.5)), F)
    lo = F // 2 - (c - 1) // 2
    hi = lo + c - 1
    if hi > F - 1:
        lo -= hi - (F - 1)
    return np.arange(lo, lo + c)


def sler(ms: MarginalSet, band) -> float:
    """Share of the total energy lying outside the central band."""
    if not ms.p_tot > 0:
        raise FeatureError("total energy is zero")
    ratio = (ms.p_tot - ms.p_f[np.asarray(band)].sum()) / ms.p_tot
    return float(np.clip(ratio, 0.0, 1.0))


def _sidelobe_entropy(ms: MarginalSet, band, base=None) -> tuple[float, bool]:
    outside = np.ones(ms.n_freq, dtype=bool)
    outside[np.asarray(band)] = False
    lobes = ms.p_f[outside]
    total = lobes.sum()
    if not total > 0:
        return 0.0, True
    return shannon_entropy(lobes / total, base), False


def sidelobe_entropy(ms: MarginalSet, band, base=None) -> float:
    """Entropy of the renormalised frequency marginal outside the band; 0 if it is empty."""
    return _sidelobe_entropy(ms, band, base)[0]


def spectral_entropy(ms: MarginalSet, base=None) -> float:
    return shannon_entropy(ms.pf_norm, base)


def temporal_entropy(ms: MarginalSet, base=None) -> float:
    return shannon_entropy(ms.pt_norm, base)


def temporal_energy_variance(ms: MarginalSet) -> float:
    """Population variance of the unnormalised time marginal."""
    return float(np.var(ms.p_t))


def _mean_and_spread(pf_norm, axis) -> tuple[float, float]:
    axis = np.asarray(axis, dtype=np.float64)
    mu = float(np.dot(pf_norm, axis))
    return mu, math.sqrt(max(float(np.dot(pf_norm, (axis - mu) ** 2)), 0.0))


def doppler_spread(ms: MarginalSet, axis) -> float:
    """Power-weighted standard deviation of the Doppler frequency."""
    return _mean_and_spread(ms.pf_norm, axis)[1]


def doppler_bw_p80(ms: MarginalSet, axis, level: float = 0.8) -> float:
    """
    ``|f|`` at which the mass accumulated outward from zero Doppler first
    reaches ``level``. Bins at equal ``|f|`` keep axis order.
    """
    magnitude = np.abs(np.asarray(axis, dtype=np.float64))
    order = np.argsort(magnitude, kind="stable")
    cumulative = np.cumsum(ms.pf_norm[order])
    # guard against rounding leaving the total just below level
    reached = np.flatnonzero(cumulative >= level - 1e-12)
    index = reached[0] if reached.size else order.size - 1
    return float(magnitude[order[index]])


def zero_doppler_ratio(ms: MarginalSet, axis=None, beta: float = 0.05) -> float:
    """Frequency pmf mass within the ``beta`` window centred on zero Doppler."""
    return float(np.clip(ms.pf_norm[central_band(ms.n_freq, beta)].sum(), 0.0, 1.0))


def _freq_moments(ms: MarginalSet, axis) -> tuple[float, float, bool]:
    axis = np.asarray(axis, dtype=np.float64)
    mu, sigma = _mean_and_spread(ms.pf_norm, axis)
    if sigma == 0:
        return 0.0, 0.0, True
    z = (axis - mu) / sigma
    skewness = float(np.dot(ms.pf_norm, z**3))
    kurtosis = float(np.dot(ms.pf_norm, z**4)) - 3.0
    return skewness, kurtosis, False


def freq_moments(ms: MarginalSet, axis) -> tuple[float, float]:
    """Skewness and excess kurtosis of the Doppler pmf; ``(0, 0)`` when the spread is zero."""
    skewness, kurtosis, _ = _freq_moments(ms, axis)
    return skewness, kurtosis


def features_from_marginals(ms: MarginalSet, axis, config: FeatureConfig | None = None):
    config = config or FeatureConfig()
    axis = np.asarray(axis, dtype=np.float64)
    if axis.shape != ms.p_f.shape:
        raise FeatureError(f"Doppler axis has {axis.size} bins, spectrogram has {ms.n_freq}")
    band = central_band(ms.n_freq, config.alpha)
    base = config.entropy_base
    lobe_entropy, lobes_empty = _sidelobe_entropy(ms, band, base)
    skewness, kurtosis, flat = _freq_moments(ms, axis)
    flags = []
    if lobes_empty:
        flags.append(SIDELOBE_DEGENERATE)
    if flat:
        flags.append(MOMENTS_DEGENERATE)
    return FeatureVector(
        sler=sler(ms, band),
        sidelobe_entropy=lobe_entropy,
        spectral_entropy=spectral_entropy(ms, base),
        temporal_entropy=temporal_entropy(ms, base),
        temporal_energy_variance=temporal_energy_variance(ms),
        doppler_bw_p80=doppler_bw_p80(ms, axis),
        doppler_spread=doppler_spread(ms, axis),
        zero_doppler_ratio=zero_doppler_ratio(ms, axis, config.beta),
        skewness=skewness,
        kurtosis=kurtosis,
        flags=tuple(flags),
    )


def extract(s: Spectrogram, config: FeatureConfig | None = None) -> FeatureVector:
    """
    All ten descriptors of a spectrogram from a single marginal pass.

    Parameters
    ----------
    s : Spectrogram
    config : FeatureConfig, optional
        Band fractions, entropy base and pad threshold; defaults when None.

    Returns
    -------
    FeatureVector
        Values in ``FEATURE_NAMES`` order plus degeneracy flags.
    """
    config = config or FeatureConfig()
    return features_from_marginals(
        marginals(s, config.pad_threshold), s.doppler_axis_hz, config
    )
