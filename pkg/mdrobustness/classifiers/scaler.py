"""Z-score standardisation and the fixed class label encoding."""

from dataclasses import dataclass

import numpy as np

from mdrobustness.signal_chain.ingest import TargetClass

STD_FLOOR = 1e-12

# lexicographic by class name
CLASS_IDS = {c.value: i for i, c in enumerate(sorted(TargetClass, key=lambda c: c.value))}
CLASS_NAMES = tuple(sorted(CLASS_IDS, key=CLASS_IDS.get))


@dataclass(frozen=True)
class ScalerParams:
    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray

    def to_dict(self) -> dict:
        return {
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "constant": self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScalerParams":
        return cls(
            means=np.asarray(data["means"], dtype=np.float64),
            stds=np.asarray(data["stds"], dtype=np.float64),
            constant=np.asarray(data["constant"], dtype=bool),
        )


def fit_scaler(X) -> ScalerParams:
    """
    Per-column mean and population standard deviation of the training rows.

    Columns with zero spread get a floored std and are mapped to 0 by
    ``apply_scaler``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("fit_scaler needs a matrix with at least 2 rows")
    stds = X.std(axis=0)
    constant = stds <= STD_FLOOR
    return ScalerParams(means=X.mean(axis=0), stds=np.maximum(stds, STD_FLOOR), constant=constant)


def apply_scaler(params: ScalerParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.means.size:
        raise ValueError(
            f"expected {params.means.size} feature columns, got shape {X.shape}"
        )
    Z = (X - params.means) / params.stds
    Z[:, params.constant] = 0.0
    return Z


def encode_labels(labels) -> np.ndarray:
    """Map class labels (names or ``TargetClass``) to ids: bird 0, drone 1, reflector 2."""
    labels = list(labels)
    if not labels:
        raise ValueError("encode_labels needs at least one label")
    return np.array([CLASS_IDS[TargetClass.parse(label).value] for label in labels], dtype=np.int64)


def decode_labels(ids) -> list[str]:
    return [CLASS_NAMES[int(i)] for i in ids]
