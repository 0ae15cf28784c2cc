"""
Soft-margin support vector machines trained with sequential minimal
optimisation.

Each binary sub-problem solves the dual

    min_a  1/2 a' Q a - e' a   s.t.  y' a = 0,  0 <= a <= C,   Q_ij = y_i y_j K_ij

with second-order working-set selection: ``i`` is the maximal violator in
``I_up`` and ``j`` the ``I_low`` index giving the largest guaranteed decrease of
the objective. Ties go to the lowest index, so training is deterministic.
Multiclass problems are decomposed one-vs-one.
"""

import itertools
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

from mdrobustness.errors import SvmConvergenceError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-3
MAX_PASSES = 10_000
TAU = 1e-12


class KernelKind(str, Enum):
    LINEAR = "linear"
    RBF = "rbf"


@dataclass(frozen=True)
class Kernel:
    kind: KernelKind
    gamma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.kind is KernelKind.RBF and not (self.gamma is not None and self.gamma > 0):
            raise ValueError("rbf kernel needs gamma > 0")
        if self.kind is KernelKind.LINEAR and self.gamma is not None:
            raise ValueError("linear kernel takes no gamma")

    @classmethod
    def linear(cls) -> "Kernel":
        return cls(KernelKind.LINEAR)

    @classmethod
    def rbf(cls, gamma: float) -> "Kernel":
        return cls(KernelKind.RBF, float(gamma))

    def __call__(self, A, B) -> np.ndarray:
        A = np.asarray(A, dtype=np.float64)
        B = np.asarray(B, dtype=np.float64)
        if self.kind is KernelKind.LINEAR:
            return A @ B.T
        return np.exp(-self.gamma * cdist(A, B, "sqeuclidean"))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, data: dict) -> "Kernel":
        return cls(KernelKind(data["kind"]), data.get("gamma"))


@dataclass(frozen=True)
class BinarySolution:
    """Dual solution of one two-class problem, labels in {+1, -1}."""

    alpha: np.ndarray
    b: float
    objective: float
    n_iter: int
    residual: float


@dataclass(frozen=True)
class SvmModel:
    """
    One-vs-one SVM.

    Attributes
    ----------
    kernel : Kernel
    c : float
    support_vectors : np.ndarray
        ``[n_sv x d]`` training rows with a non-zero dual variable in any pair.
    dual_coefs : np.ndarray
        ``[n_pairs x n_sv]`` signed coefficients ``alpha_t * y_t``, zero where a
        support vector does not take part in a pair.
    intercepts : np.ndarray
        One bias per pair.
    class_ids : np.ndarray
        Sorted class ids seen in training.
    pairs : np.ndarray
        ``[n_pairs x 2]`` class ids; a positive decision value votes for the first.
    seed : int
        Recorded for provenance; working-set selection is deterministic.
    """

    kernel: Kernel
    c: float
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    intercepts: np.ndarray
    class_ids: np.ndarray
    pairs: np.ndarray
    seed: int = 0

    @property
    def n_features(self) -> int:
        return int(self.support_vectors.shape[1])


def _bias(alpha, y, G, c) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < c)
    if free.any():
        return float(-yG[free].mean())
    at_upper = alpha >= c
    at_lower = alpha <= 0
    ub_mask = (at_lower & (y > 0)) | (at_upper & (y < 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    if not np.isfinite(ub) or not np.isfinite(lb):
        finite = [v for v in (ub, lb) if np.isfinite(v)]
        return float(-finite[0]) if finite else 0.0
    return float(-(ub + lb) / 2)


def smo_solve(K, y, c: float, tol: float = DEFAULT_TOL, max_iter: int | None = None):
    """
    Solve one binary soft-margin dual.

    Parameters
    ----------
    K : np.ndarray
        ``[n x n]`` kernel matrix.
    y : np.ndarray
        Labels in {+1, -1}.
    c : float
        Box constraint.
    tol : float
        Stop once the maximal KKT violation ``m(a) - M(a)`` drops below it.
    max_iter : int, optional
        Iteration budget; ``MAX_PASSES * n`` when None.

    Returns
    -------
    BinarySolution

    Raises
    ------
    SvmConvergenceError
        If the budget runs out, carrying the last violation.
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if c <= 0:
        raise ValueError(f"C must be positive, got {c}")
    if max_iter is None:
        max_iter = MAX_PASSES * max(n, 1)
    diag = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    residual = np.inf

    for n_iter in range(max_iter + 1):
        minus_yG = -y * G
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
        if not up.any() or not low.any():
            residual = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(minus_yG[up])])
        m = minus_yG[i]
        M = minus_yG[low].min()
        residual = float(m - M)
        if residual < tol:
            break
        if n_iter == max_iter:
            raise SvmConvergenceError(
                f"SMO did not converge in {max_iter} iterations (violation {residual:.3e})",
                residual,
            )

        candidates = np.flatnonzero(low & (minus_yG < m))
        b_it = m - minus_yG[candidates]
        a_it = diag[i] + diag[candidates] - 2.0 * K[i, candidates]
        a_it = np.where(a_it > 0, a_it, TAU)
        pick = int(np.argmin(-(b_it**2) / a_it))
        j = int(candidates[pick])
        step = b_it[pick] / a_it[pick]

        # largest feasible step along y_i e_i - y_j e_j
        limit_i = c - alpha[i] if y[i] > 0 else alpha[i]
        limit_j = alpha[j] if y[j] > 0 else c - alpha[j]
        step = min(step, limit_i, limit_j)

        old_i, old_j = alpha[i], alpha[j]
        alpha[i] = old_i + y[i] * step
        alpha[j] = old_j - y[j] * step
        if step == limit_i:
            alpha[i] = c if y[i] > 0 else 0.0
        if step == limit_j:
            alpha[j] = 0.0 if y[j] > 0 else c
        alpha[i] = min(max(alpha[i], 0.0), c)
        alpha[j] = min(max(alpha[j], 0.0), c)

        d_i, d_j = alpha[i] - old_i, alpha[j] - old_j
        G += y * (y[i] * K[:, i] * d_i + y[j] * K[:, j] * d_j)

    objective = float(0.5 * alpha @ (G - 1.0))
    return BinarySolution(
        alpha=alpha, b=_bias(alpha, y, G, c), objective=objective, n_iter=n_iter, residual=residual
    )


def svm_train(X, y, kernel: Kernel, c: float, seed: int = 0, tol: float = DEFAULT_TOL):
    """
    Train a one-vs-one SVM.

    Parameters
    ----------
    X : array_like
        ``[n x d]`` finite feature matrix.
    y : array_like
        Integer class ids, at least two distinct.
    kernel : Kernel
    c : float
    seed : int
        Stored on the model only.
    tol : float
        KKT tolerance of every binary sub-problem.

    Returns
    -------
    SvmModel
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be [n x d] with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite values")
    class_ids = np.unique(y)
    if class_ids.size < 2:
        raise ValueError("svm_train needs at least two classes")

    K_full = kernel(X, X)
    pairs = list(itertools.combinations(class_ids.tolist(), 2))
    coefs = np.zeros((len(pairs), X.shape[0]))
    intercepts = np.zeros(len(pairs))
    for p, (pos, neg) in enumerate(pairs):
        rows = np.flatnonzero((y == pos) | (y == neg))
        y_bin = np.where(y[rows] == pos, 1.0, -1.0)
        solution = smo_solve(K_full[np.ix_(rows, rows)], y_bin, c, tol)
        logger.debug(
            "pair (%d, %d): %d iterations, violation %.2e", pos, neg, solution.n_iter,
            solution.residual,
        )
        coefs[p, rows] = solution.alpha * y_bin
        intercepts[p] = solution.b

    used = np.flatnonzero(np.any(coefs != 0, axis=0))
    return SvmModel(
        kernel=kernel,
        c=float(c),
        support_vectors=X[used],
        dual_coefs=coefs[:, used],
        intercepts=intercepts,
        class_ids=class_ids,
        pairs=np.asarray(pairs, dtype=np.int64).reshape(-1, 2),
        seed=int(seed),
    )


def svm_decision_function(model: SvmModel, X) -> np.ndarray:
    """``[n x n_pairs]`` decision values."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(
            f"model expects {model.n_features} features, got shape {X.shape}"
        )
    return model.kernel(X, model.support_vectors) @ model.dual_coefs.T + model.intercepts


def svm_predict(model: SvmModel, X) -> np.ndarray:
    """
    One-vs-one vote. Ties go to the class with the larger summed signed
    decision value, then to the lower class id.
    """
    decisions = svm_decision_function(model, X)
    n_classes = model.class_ids.size
    index = {int(cid): k for k, cid in enumerate(model.class_ids)}
    votes = np.zeros((decisions.shape[0], n_classes))
    margins = np.zeros((decisions.shape[0], n_classes))
    for p, (pos, neg) in enumerate(model.pairs):
        f = decisions[:, p]
        votes[:, index[int(pos)]] += f > 0
        votes[:, index[int(neg)]] += f <= 0
        margins[:, index[int(pos)]] += f
        margins[:, index[int(neg)]] -= f
    tied = votes == votes.max(axis=1, keepdims=True)
    ranked = np.where(tied, margins, -np.inf)
    return model.class_ids[np.argmax(ranked, axis=1)]
