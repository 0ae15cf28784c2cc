from dataclasses import dataclass, field

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class Metrics:
    """
    Macro-averaged classification scores.

    ``confusion[i, j]`` counts rows of true class ``i`` predicted as ``j``.
    ``absent_classes`` lists classes missing from both truth and prediction;
    they count as 0 in every macro average.
    """

    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: np.ndarray
    per_class: pd.DataFrame = field(repr=False)
    absent_classes: tuple[int, ...] = ()

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
        }


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def compute_metrics(y_true, y_pred, K: int) -> Metrics:
    """
    Accuracy, macro precision / recall / F1 and the confusion matrix.

    Per-class scores with a zero denominator are 0.

    Raises
    ------
    ValueError
        On empty or unequal inputs, or labels outside ``range(K)``.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise ValueError("compute_metrics needs at least one prediction")
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")
    for labels in (y_true, y_pred):
        if labels.min() < 0 or labels.max() >= K:
            raise ValueError(f"labels must lie in [0, {K})")

    confusion = np.zeros((K, K), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    tp = np.diag(confusion).astype(np.float64)
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    precision = _ratio(tp, predicted)
    recall = _ratio(tp, support)
    f1 = _ratio(2 * precision * recall, precision + recall)
    absent = tuple(int(k) for k in np.flatnonzero((support == 0) & (predicted == 0)))

    per_class = pd.DataFrame(
        {"precision": precision, "recall": recall, "f1": f1, "support": support},
        index=pd.Index(range(K), name="class_id"),
    )
    return Metrics(
        accuracy=float(tp.sum() / confusion.sum()),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        confusion=confusion,
        per_class=per_class,
        absent_classes=absent,
    )


def macro_f1(y_true, y_pred, K: int) -> float:
    return compute_metrics(y_true, y_pred, K).macro_f1
