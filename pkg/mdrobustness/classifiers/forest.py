"""
Random forest of Gini decision trees.

Trees are stored as flat arrays (one entry per node). Every tree gets its own
Philox stream seeded from ``(seed, tree_index)``, which makes a forest
independent of the order trees are grown in and lets ``n_jobs`` grow them in
parallel without changing the result.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

LEAF = -1


@dataclass(frozen=True)
class DecisionTree:
    """
    Array-encoded binary tree.

    A sample goes left when ``x[feature] <= threshold``. ``counts`` holds the
    bootstrap class counts reaching every node; leaves vote for their majority.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    depth: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def max_leaf_depth(self) -> int:
        return int(self.depth[self.feature == LEAF].max())

    def leaf_index(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feature = self.feature[node]
            inner = feature != LEAF
            if not inner.any():
                return node
            r = rows[inner]
            go_left = X[r, feature[inner]] <= self.threshold[node[inner]]
            node[inner] = np.where(go_left, self.left[node[inner]], self.right[node[inner]])

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        """Majority class index of the reached leaf, ties to the lower index."""
        return np.argmax(self.counts[self.leaf_index(X)], axis=1)


@dataclass(frozen=True)
class ForestModel:
    trees: list[DecisionTree]
    class_ids: np.ndarray
    n_estimators: int = 300
    max_depth: int = 5
    seed: int = 42
    n_features: int = 0
    bootstrap_indices: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def degenerate(self) -> bool:
        """True for the constant model fitted on single-class data."""
        return self.class_ids.size == 1


def _best_split(Xn: np.ndarray, yn: np.ndarray, features: np.ndarray, n_classes: int):
    # weighted Gini n_l * G_l + n_r * G_r == n - sum(l**2)/n_l - sum(r**2)/n_r
    n = yn.size
    onehot = np.eye(n_classes)[yn]
    total = onehot.sum(axis=0)
    n_left = np.arange(1, n)
    best = (np.inf, None, None)
    for f in features:
        order = np.argsort(Xn[:, f], kind="stable")
        values = Xn[order, f]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = total - left
        valid = values[:-1] < values[1:]
        if not valid.any():
            continue
        score = (
            n
            - (left**2).sum(axis=1) / n_left
            - (right**2).sum(axis=1) / (n - n_left)
        )
        score = np.where(valid, score, np.inf)
        p = int(np.argmin(score))
        if score[p] < best[0]:
            threshold = (values[p] + values[p + 1]) / 2
            if not values[p] <= threshold < values[p + 1]:
                threshold = values[p]
            best = (score[p], int(f), float(threshold))
    return best[1], best[2]


def _grow_tree(X, y, n_classes, max_depth, seed, tree_index):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, tree_index])))
    n, d = X.shape
    k = math.ceil(math.sqrt(d))
    sample = rng.integers(0, n, size=n)

    feature, threshold, left, right, counts, depth = [], [], [], [], [], []

    def new_node(rows, level):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        counts.append(np.bincount(y[rows], minlength=n_classes))
        depth.append(level)
        return len(feature) - 1

    stack = [(new_node(sample, 0), sample)]
    while stack:
        node, rows = stack.pop()
        if depth[node] >= max_depth or np.count_nonzero(counts[node]) < 2:
            continue
        candidates = rng.choice(d, size=k, replace=False)
        f, t = _best_split(X[rows], y[rows], candidates, n_classes)
        if f is None:
            continue
        go_left = X[rows, f] <= t
        feature[node], threshold[node] = f, t
        left_rows, right_rows = rows[go_left], rows[~go_left]
        left[node] = new_node(left_rows, depth[node] + 1)
        right[node] = new_node(right_rows, depth[node] + 1)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], right_rows))
        stack.append((left[node], left_rows))

    tree = DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        counts=np.asarray(counts, dtype=np.int64),
        depth=np.asarray(depth, dtype=np.int64),
    )
    return tree, sample


def rf_train(X, y, n_estimators: int = 300, max_depth: int = 5, seed: int = 42, n_jobs=1):
    """
    Grow a bootstrap forest of Gini trees with ``ceil(sqrt(d))`` candidate
    features per split.

    Parameters
    ----------
    X : array_like
        Unscaled ``[n x d]`` feature matrix.
    y : array_like
        Integer class ids.
    n_estimators, max_depth : int
    seed : int
    n_jobs : int
        joblib workers used to grow the trees.

    Returns
    -------
    ForestModel
        A constant model when ``y`` holds a single class.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.size or y.size == 0:
        raise ValueError("X must be a non-empty [n x d] matrix with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite values")
    if n_estimators < 1 or max_depth < 0:
        raise ValueError("n_estimators must be >= 1 and max_depth >= 0")
    class_ids, y_index = np.unique(y, return_inverse=True)
    common = dict(
        class_ids=class_ids,
        n_estimators=n_estimators,
        max_depth=max_depth,
        seed=int(seed),
        n_features=X.shape[1],
    )
    if class_ids.size == 1:
        return ForestModel(trees=[], **common)

    grown = Parallel(n_jobs=n_jobs)(
        delayed(_grow_tree)(X, y_index, class_ids.size, max_depth, int(seed), t)
        for t in range(n_estimators)
    )
    return ForestModel(
        trees=[tree for tree, _ in grown],
        bootstrap_indices=[sample for _, sample in grown],
        **common,
    )


def _check_features(model: ForestModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got shape {X.shape}")
    return X


def _tally(model: ForestModel, X, trees) -> np.ndarray:
    votes = np.zeros((X.shape[0], model.class_ids.size), dtype=np.int64)
    rows = np.arange(X.shape[0])
    for tree in trees:
        np.add.at(votes, (rows, tree.predict_index(X)), 1)
    return votes


def rf_predict(model: ForestModel, X) -> np.ndarray:
    """Hard majority vote over trees; ties go to the lower class id."""
    X = _check_features(model, X)
    if model.degenerate:
        return np.full(X.shape[0], model.class_ids[0])
    return model.class_ids[np.argmax(_tally(model, X, model.trees), axis=1)]


def rf_oob_accuracy(model: ForestModel, X, y) -> float:
    """
    Accuracy on the training rows using, for each row, only the trees whose
    bootstrap sample left it out. Rows that every tree saw are skipped.
    """
    X = _check_features(model, X)
    y = np.asarray(y, dtype=np.int64)
    if model.degenerate:
        return float(np.mean(y == model.class_ids[0]))
    votes = np.zeros((X.shape[0], model.class_ids.size), dtype=np.int64)
    for tree, sample in zip(model.trees, model.bootstrap_indices):
        out = np.setdiff1d(np.arange(X.shape[0]), sample)
        if out.size:
            np.add.at(votes, (out, tree.predict_index(X[out])), 1)
    scored = votes.sum(axis=1) > 0
    if not scored.any():
        raise ValueError("no out-of-bag rows; grow more trees")
    predicted = model.class_ids[np.argmax(votes[scored], axis=1)]
    return float(np.mean(predicted == y[scored]))
