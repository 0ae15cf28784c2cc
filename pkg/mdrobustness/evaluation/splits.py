"""
Measurement-level holdout and stratified K-fold assignment.

Per class (in sorted class order) the ids are sorted, permuted with a Philox
stream keyed by ``(seed, class)``, the first ``round(fraction * n)`` go to the
holdout and the rest are dealt round-robin over the folds. The dealing offset
carries over from one class to the next so fold sizes stay balanced overall.
"""

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from mdrobustness.errors import SplitError


@dataclass(frozen=True)
class SplitPlan:
    holdout_ids: tuple[str, ...]
    folds: tuple[tuple[str, ...], ...]
    seed: int = 42

    @property
    def n_folds(self) -> int:
        return len(self.folds)

    @property
    def cv_ids(self) -> tuple[str, ...]:
        return tuple(sorted(i for fold in self.folds for i in fold))

    def train_ids(self, fold: int) -> tuple[str, ...]:
        """Ids of every CV fold except ``fold``."""
        return tuple(sorted(i for k, f in enumerate(self.folds) if k != fold for i in f))

    def fold_of(self) -> dict[str, int]:
        return {i: k for k, fold in enumerate(self.folds) for i in fold}

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "holdout_ids": list(self.holdout_ids),
            "folds": [list(f) for f in self.folds],
        }


def _class_rng(seed: int, label: str) -> np.random.Generator:
    word = int.from_bytes(label.encode(), "little")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), word])))


def make_split(
    labels_by_id: dict[str, str],
    seed: int = 42,
    n_folds: int = 5,
    holdout_fraction: float = 0.2,
) -> SplitPlan:
    """
    Stratified holdout plus ``n_folds`` disjoint stratified CV folds.

    Parameters
    ----------
    labels_by_id : dict
        Measurement id to class label.
    seed : int
    n_folds : int
    holdout_fraction : float
        Share of every class held out, rounded half up.

    Returns
    -------
    SplitPlan
        Fold and holdout ids sorted.

    Raises
    ------
    SplitError
        If a class leaves fewer than ``n_folds`` measurements for CV.
    """
    if n_folds < 2:
        raise SplitError(f"need at least 2 folds, got {n_folds}")
    if not 0 <= holdout_fraction < 1:
        raise SplitError(f"holdout_fraction must lie in [0, 1), got {holdout_fraction}")
    by_class: dict[str, list[str]] = {}
    for measurement_id, label in labels_by_id.items():
        by_class.setdefault(str(label), []).append(str(measurement_id))

    holdout: list[str] = []
    folds: list[list[str]] = [[] for _ in range(n_folds)]
    offset = 0
    for label in sorted(by_class):
        ids = sorted(by_class[label])
        order = _class_rng(seed, label).permutation(len(ids))
        shuffled = [ids[k] for k in order]
        n_holdout = math.floor(holdout_fraction * len(ids) + 0.5)
        pool = shuffled[n_holdout:]
        if len(pool) < n_folds:
            raise SplitError(
                f"class '{label}' has {len(pool)} measurements outside the holdout, "
                f"fewer than the {n_folds} folds"
            )
        holdout.extend(shuffled[:n_holdout])
        for k, measurement_id in enumerate(pool):
            folds[(offset + k) % n_folds].append(measurement_id)
        offset = (offset + len(pool)) % n_folds

    return SplitPlan(
        holdout_ids=tuple(sorted(holdout)),
        folds=tuple(tuple(sorted(f)) for f in folds),
        seed=int(seed),
    )


def fold_class_counts(plan: SplitPlan, labels_by_id: dict[str, str]) -> list[Counter]:
    return [Counter(labels_by_id[i] for i in fold) for fold in plan.folds]
