"""
Permutation importance: the drop in macro-F1 when a single feature column is
shuffled while every other column stays fixed.
"""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import pandas as pd

from mdrobustness.classifiers.metrics import macro_f1


@dataclass(frozen=True)
class ImportanceResult:
    baseline_f1: float
    mean_drop: np.ndarray
    std_drop: np.ndarray
    drops: np.ndarray

    def to_frame(self, feature_names) -> pd.DataFrame:
        return pd.DataFrame(
            {"mean_drop": self.mean_drop, "std_drop": self.std_drop},
            index=pd.Index(list(feature_names), name="feature"),
        )


def _permute(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.permutation(n)


def feature_rng(seed: int, feature: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(feature)])))


def permutation_importance(
    predict_fn: Callable[[np.ndarray], np.ndarray],
    X_val,
    y_val,
    n_repeats: int = 10,
    seed: int = 42,
    n_classes: int = 3,
    shuffler: Callable[[np.random.Generator, int], np.ndarray] | None = None,
) -> ImportanceResult:
    """
    Parameters
    ----------
    predict_fn : callable
        Maps a feature matrix to predicted class ids.
    X_val, y_val : array_like
        Validation rows (at least 2) and their class ids.
    n_repeats : int
        Shuffles per feature.
    seed : int
        Every feature draws its permutations from its own stream keyed by
        ``(seed, feature index)``.
    n_classes : int
    shuffler : callable, optional
        ``shuffler(rng, n)`` returns the row permutation to apply; a random
        permutation by default.

    Returns
    -------
    ImportanceResult
        ``drops[j, r]`` is ``baseline - F1`` after the r-th shuffle of column j;
        ``std_drop`` is the population standard deviation over repeats.
    """
    X_val = np.asarray(X_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.int64)
    if X_val.ndim != 2 or X_val.shape[0] < 2 or X_val.shape[0] != y_val.size:
        raise ValueError("permutation importance needs at least 2 labelled validation rows")
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    shuffler = shuffler or _permute

    n, d = X_val.shape
    baseline = macro_f1(y_val, predict_fn(X_val), n_classes)
    drops = np.zeros((d, n_repeats))
    for j in range(d):
        rng = feature_rng(seed, j)
        shuffled = X_val.copy()
        for r in range(n_repeats):
            shuffled[:, j] = X_val[shuffler(rng, n), j]
            drops[j, r] = baseline - macro_f1(y_val, predict_fn(shuffled), n_classes)
    return ImportanceResult(
        baseline_f1=baseline, mean_drop=drops.mean(axis=1), std_drop=drops.std(axis=1), drops=drops
    )
