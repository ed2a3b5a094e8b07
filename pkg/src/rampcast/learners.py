"""CART decision trees and discrete multi-class AdaBoost (SAMME)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _tree_kernel as _k
from .core import DataError

CRITERIA = {"gini": _k.GINI, "entropy": _k.ENTROPY, "log_loss": _k.LOG_LOSS}
SPLIT_TOL = 1e-12
# error floor used to cap alpha when a weak learner is perfect on its weights
ERROR_FLOOR = 1e-10


@dataclass(frozen=True)
class TreeConfig:
    """Growth limits; the min-sample limits are fractions of the training rows.

    Every feature is examined at every node, so ``seed`` never changes the
    fitted tree; it is kept so configurations round-trip unchanged.
    """

    max_depth: int = 7
    criterion: str = "entropy"
    min_samples_split: float = 0.159
    min_samples_leaf: float = 0.03
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise DataError("max_depth must be >= 1")
        if self.criterion not in CRITERIA:
            raise DataError(f"criterion must be one of {sorted(CRITERIA)}")
        if not 0 < self.min_samples_split <= 1:
            raise DataError("min_samples_split must lie in (0, 1]")
        if not 0 < self.min_samples_leaf < 1:
            raise DataError("min_samples_leaf must lie in (0, 1)")

    def min_counts(self, n_rows: int) -> tuple[int, int]:
        split = max(2, math.ceil(self.min_samples_split * n_rows))
        leaf = max(1, math.ceil(self.min_samples_leaf * n_rows))
        return split, leaf


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Array-encoded binary tree; leaves have ``feature == -1``.

    ``decrease[k]`` is the weighted impurity reduction of the split at node
    ``k`` (``W_k * imp_k - W_left * imp_left - W_right * imp_right``).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    impurity: np.ndarray
    weighted_n: np.ndarray
    n_samples: np.ndarray
    decrease: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def n_classes(self) -> int:
        return int(self.value.shape[1])

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for k in range(self.n_nodes):
            if self.feature[k] >= 0:
                depths[self.left[k]] = depths[self.right[k]] = depths[k] + 1
        return int(depths.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = _check_X(X, self.n_features)
        return _k.apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def feature_importance(self) -> np.ndarray:
        imp = np.zeros(self.n_features)
        split = self.feature >= 0
        np.add.at(imp, self.feature[split], self.decrease[split])
        total = imp.sum()
        return imp / total if total > 0 else imp

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "impurity": self.impurity.tolist(),
            "weighted_n": self.weighted_n.tolist(),
            "n_samples": self.n_samples.tolist(),
            "decrease": self.decrease.tolist(),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        ints = ("feature", "left", "right", "n_samples")
        arrays = {k: np.asarray(d[k], dtype=np.int64 if k in ints else np.float64)
                  for k in ("feature", "threshold", "left", "right", "value", "impurity",
                            "weighted_n", "n_samples", "decrease")}
        if arrays["value"].ndim != 2:
            raise DataError("tree value array must be 2-D")
        return cls(n_features=int(d["n_features"]), **arrays)


def _check_X(X: np.ndarray, n_features: int) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise DataError(f"expected rows with {n_features} columns, got shape {X.shape}")
    return X


def presort(X: np.ndarray) -> np.ndarray:
    """Per-feature ascending row order, shape ``(n_features, n_rows)``."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def fit_tree(X: np.ndarray, y: np.ndarray, n_classes: int, cfg: TreeConfig,
             weights: np.ndarray | None = None, order: np.ndarray | None = None) -> DecisionTree:
    """Grow a tree greedily on weighted impurity decrease.

    Candidate thresholds are midpoints between consecutive distinct values.
    Near-ties (within a relative 1e-12) keep the lowest feature index, then
    the lowest threshold. ``order`` may pass a precomputed :func:`presort`.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("fit_tree needs at least one row")
    if y.shape != (X.shape[0],):
        raise DataError("y must have one label per row")
    if y.min() < 0 or y.max() >= n_classes:
        raise DataError("labels must be class codes in [0, n_classes)")
    if weights is None:
        weights = np.full(X.shape[0], 1.0 / X.shape[0])
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if weights.shape != y.shape or np.any(weights < 0) or not weights.sum() > 0:
        raise DataError("weights must be non-negative with a positive sum")
    if order is None:
        order = presort(X)
    min_split, min_leaf = cfg.min_counts(X.shape[0])
    arrays = _k.build_tree(X, y, weights, order, n_classes, cfg.max_depth, min_split,
                           min_leaf, CRITERIA[cfg.criterion], SPLIT_TOL)
    return DecisionTree(*arrays, n_features=X.shape[1])


def samme_alpha(error: float, n_classes: int, learning_rate: float = 1.0) -> float:
    return learning_rate * (math.log((1.0 - error) / error) + math.log(n_classes - 1))


@dataclass(frozen=True, eq=False)
class BoostedEnsemble:
    trees: tuple[DecisionTree, ...]
    alphas: np.ndarray
    n_classes: int
    learning_rate: float = 1.0
    errors: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if len(self.trees) != len(self.alphas):
            raise DataError("one alpha per tree required")

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        """``scores[r, c] = sum_j alpha_j * [tree_j(X[r]) == c]``."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        scores = np.zeros((X.shape[0], self.n_classes))
        rows = np.arange(X.shape[0])
        for tree, alpha in zip(self.trees, self.alphas):
            scores[rows, tree.predict(X)] += alpha
        return scores

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_scores(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "learning_rate": self.learning_rate,
            "alphas": [float(a) for a in self.alphas],
            "errors": list(self.errors),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoostedEnsemble":
        return cls(tuple(DecisionTree.from_dict(t) for t in d["trees"]),
                   np.asarray(d["alphas"], dtype=np.float64), int(d["n_classes"]),
                   float(d["learning_rate"]), tuple(d.get("errors", ())))


RoundCallback = Callable[[int, np.ndarray, float, float], None]


def fit_adaboost(X: np.ndarray, y: np.ndarray, n_classes: int, cfg: TreeConfig,
                 n_estimators: int, learning_rate: float = 1.0,
                 callback: RoundCallback | None = None) -> BoostedEnsemble:
    """Discrete SAMME boosting of :func:`fit_tree` weak learners.

    A perfect weak learner is kept with its alpha capped at
    ``samme_alpha(ERROR_FLOOR)`` and boosting stops; a learner no better than
    chance (error >= 1 - 1/C) is discarded and boosting stops. ``callback``
    receives ``(round, normalized_weights, error, alpha)`` after each kept
    round.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if n_estimators < 1:
        raise DataError("n_estimators must be >= 1")
    if np.unique(y).size < 2:
        raise DataError("boosting needs at least two classes in the training rows")
    if n_classes < 2:
        raise DataError("n_classes must be >= 2")
    order = presort(X)
    w = np.full(y.size, 1.0 / y.size)
    trees: list[DecisionTree] = []
    alphas: list[float] = []
    errors: list[float] = []
    chance = 1.0 - 1.0 / n_classes
    for j in range(n_estimators):
        tree = fit_tree(X, y, n_classes, cfg, w, order)
        miss = tree.predict(X) != y
        err = float(w[miss].sum() / w.sum())
        # tolerance absorbs summation round-off at exactly chance level
        if err >= chance - SPLIT_TOL:
            break
        perfect = err <= 0.0
        alpha = samme_alpha(max(err, ERROR_FLOOR), n_classes, learning_rate)
        trees.append(tree)
        alphas.append(alpha)
        errors.append(err)
        if perfect:
            if callback is not None:
                callback(j, w, err, alpha)
            break
        w = w * np.exp(alpha * miss)
        w /= w.sum()
        if callback is not None:
            callback(j, w, err, alpha)
    return BoostedEnsemble(tuple(trees), np.asarray(alphas), n_classes, learning_rate, tuple(errors))


def predict(ensemble: BoostedEnsemble, row: Sequence[float]) -> tuple[int, np.ndarray]:
    """Single-row prediction: (class code, per-class score vector)."""
    x = np.asarray(row, dtype=np.float64)[None, :]
    scores = ensemble.decision_scores(x)[0]
    return int(np.argmax(scores)), scores


def mdi_importance(trees: Sequence[DecisionTree], alphas: Sequence[float]) -> np.ndarray:
    """Alpha-weighted mean of per-tree normalized impurity decreases, summing to 1.

    Trees without splits carry no importance. If no tree splits at all the
    importance is spread uniformly.
    """
    if not trees:
        raise DataError("no trees to rank features with")
    n_features = trees[0].n_features
    acc = np.zeros(n_features)
    for tree, alpha in zip(trees, alphas):
        acc += alpha * tree.feature_importance()
    total = acc.sum()
    if total <= 0:
        return np.full(n_features, 1.0 / n_features)
    return acc / total
