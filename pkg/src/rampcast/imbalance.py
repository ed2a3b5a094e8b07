"""EasyEnsemble over SAMME boosted trees, plus naive baselines."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .core import ClassScheme, DataError, RampClass, UNKNOWN_CODE
from .learners import BoostedEnsemble, DecisionTree, TreeConfig, fit_adaboost, mdi_importance
from .preprocess import InstanceMatrix, column_names
from .seeding import DEFAULT_SEED, rng_for

MODEL_FORMAT = "rampcast-easy-ensemble"
MODEL_VERSION = 1


@dataclass(frozen=True)
class EasyConfig:
    """``n_subsets`` is L (majority undersamples), ``n_estimators`` is S per subset."""

    n_subsets: int = 10
    n_estimators: int = 10
    tree: TreeConfig = field(default_factory=TreeConfig)
    learning_rate: float = 1.0
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if self.n_subsets < 1 or self.n_estimators < 1:
            raise DataError("L and S must be >= 1")
        if not self.learning_rate > 0:
            raise DataError("learning_rate must be positive")

    @classmethod
    def tuned_defaults(cls, scheme: ClassScheme, seed: int = DEFAULT_SEED) -> "EasyConfig":
        """Optimal values reported for the real dataset, per class scheme."""
        if scheme is ClassScheme.THREE:
            tree = TreeConfig(max_depth=7, criterion="entropy", min_samples_split=0.159,
                              min_samples_leaf=0.03)
            return cls(199, 10, tree, 1.035, seed)
        tree = TreeConfig(max_depth=4, criterion="entropy", min_samples_split=0.327,
                          min_samples_leaf=0.059)
        return cls(90, 10, tree, 1.006, seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EasyConfig":
        d = dict(d)
        d["tree"] = TreeConfig(**d.get("tree", {}))
        return cls(**d)


def majority_class(y: np.ndarray, n_classes: int) -> int:
    """Most frequent code; ties go to the lowest code."""
    return int(np.argmax(np.bincount(y, minlength=n_classes)))


def balanced_subsets(y: np.ndarray, n_classes: int, n_subsets: int, seed: int
                     ) -> tuple[int, list[np.ndarray]]:
    """Row indices of each training subset: all non-majority rows plus
    ``min(|M|, |P|)`` majority rows drawn without replacement.

    Subset ``i`` draws from its own generator derived from ``(seed, i)``.
    """
    y = np.asarray(y)
    maj = majority_class(y, n_classes)
    majority_rows = np.flatnonzero(y == maj)
    other_rows = np.flatnonzero(y != maj)
    if other_rows.size == 0:
        raise DataError("only one class present; nothing to balance against")
    size = min(majority_rows.size, other_rows.size)
    subsets = []
    for i in range(n_subsets):
        drawn = rng_for(seed, "subset", i).choice(majority_rows, size=size, replace=False)
        subsets.append(np.sort(np.concatenate([other_rows, drawn])))
    return maj, subsets


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    members: tuple[BoostedEnsemble, ...]
    config: EasyConfig
    scheme: ClassScheme
    l: int
    h: int
    columns: tuple[str, ...]
    majority: int
    labeling: dict = field(default_factory=dict)
    member_rows: tuple[np.ndarray, ...] | None = field(default=None, repr=False)

    @property
    def n_classes(self) -> int:
        return self.scheme.n_classes

    @property
    def trees(self) -> list[DecisionTree]:
        return [t for m in self.members for t in m.trees]

    @property
    def alphas(self) -> np.ndarray:
        parts = [m.alphas for m in self.members]
        return np.concatenate(parts) if parts else np.empty(0)

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        """Pooled alpha-weighted votes of all L x S weak learners."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.columns):
            raise DataError(f"expected rows with {len(self.columns)} columns, got {X.shape}")
        scores = np.zeros((X.shape[0], self.n_classes))
        for member in self.members:
            scores += member.decision_scores(X)
        return scores

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_scores(X), axis=1)

    def feature_importance(self) -> np.ndarray:
        return mdi_importance(self.trees, self.alphas)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "scheme": self.scheme.value,
            "l": self.l,
            "h": self.h,
            "columns": list(self.columns),
            "majority": self.majority,
            "config": self.config.to_dict(),
            "labeling": self.labeling,
            "members": [m.to_dict() for m in self.members],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleModel":
        if d.get("format") != MODEL_FORMAT:
            raise DataError("not a rampcast model document")
        if d.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {d.get('version')}")
        return cls(
            tuple(BoostedEnsemble.from_dict(m) for m in d["members"]),
            EasyConfig.from_dict(d["config"]),
            ClassScheme.parse(d["scheme"]),
            int(d["l"]), int(d["h"]), tuple(d["columns"]), int(d["majority"]),
            dict(d.get("labeling", {})),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EnsembleModel":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"model file is not valid JSON: {exc}") from None
        return cls.from_dict(doc)


def _fit_member(X, y, rows, n_classes, cfg: EasyConfig) -> BoostedEnsemble:
    return fit_adaboost(X[rows], y[rows], n_classes, cfg.tree, cfg.n_estimators, cfg.learning_rate)


def fit_easy_ensemble_arrays(X: np.ndarray, y: np.ndarray, n_classes: int, cfg: EasyConfig,
                             jobs: int = 1) -> tuple[int, tuple[BoostedEnsemble, ...], list[np.ndarray]]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    maj, subsets = balanced_subsets(y, n_classes, cfg.n_subsets, cfg.seed)
    if jobs == 1:
        members = [_fit_member(X, y, rows, n_classes, cfg) for rows in subsets]
    else:
        members = Parallel(n_jobs=jobs)(
            delayed(_fit_member)(X, y, rows, n_classes, cfg) for rows in subsets)
    return maj, tuple(members), subsets


def fit_easy_ensemble(matrix: InstanceMatrix, cfg: EasyConfig, jobs: int = 1,
                      labeling: dict | None = None) -> EnsembleModel:
    """Train L boosted members, each on the non-majority rows plus a fresh
    majority undersample of equal size."""
    if len(matrix) == 0:
        raise DataError("empty instance matrix")
    n_classes = matrix.scheme.n_classes
    maj, members, subsets = fit_easy_ensemble_arrays(matrix.X, matrix.y, n_classes, cfg, jobs)
    return EnsembleModel(members, cfg, matrix.scheme, matrix.l, matrix.h,
                         column_names(matrix.l), maj, dict(labeling or {}), tuple(subsets))


def predict_easy(model: EnsembleModel, row: Sequence[float]) -> tuple[RampClass, np.ndarray]:
    scores = model.decision_scores(np.asarray(row, dtype=np.float64)[None, :])[0]
    return model.scheme.label(int(np.argmax(scores))), scores


@dataclass(frozen=True, eq=False)
class TransitionBaseline:
    """Row-stochastic ``P(next | current)`` over class codes."""

    matrix: np.ndarray
    scheme: ClassScheme
    seed: int = DEFAULT_SEED
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_rng", rng_for(self.seed, "baseline"))

    def row(self, current: int) -> np.ndarray:
        if current == UNKNOWN_CODE:
            return np.full(self.scheme.n_classes, 1.0 / self.scheme.n_classes)
        return self.matrix[current]


def _transition_matrix(current: np.ndarray, following: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.zeros((n_classes, n_classes))
    np.add.at(counts, (current, following), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    uniform = np.full((1, n_classes), 1.0 / n_classes)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), uniform)
    return probs


def fit_transition_baseline(event_sequence: Sequence[RampClass], scheme: ClassScheme,
                            seed: int = DEFAULT_SEED) -> TransitionBaseline:
    """Bigram frequencies of consecutive events; unseen rows are uniform."""
    if len(event_sequence) < 2:
        raise DataError("need at least 2 events")
    codes = scheme.codes(event_sequence)
    if np.any(codes == UNKNOWN_CODE):
        raise DataError("event sequence contains unknown events")
    return TransitionBaseline(_transition_matrix(codes[:-1], codes[1:], scheme.n_classes), scheme, seed)


def fit_transition_pairs(current: np.ndarray, following: np.ndarray, scheme: ClassScheme,
                         seed: int = DEFAULT_SEED) -> TransitionBaseline:
    """Same estimate from explicit (current, next) code pairs; unknown currents are skipped."""
    current = np.asarray(current, dtype=np.int64)
    following = np.asarray(following, dtype=np.int64)
    keep = current != UNKNOWN_CODE
    return TransitionBaseline(_transition_matrix(current[keep], following[keep], scheme.n_classes),
                              scheme, seed)


def predict_baseline(b: TransitionBaseline, current: RampClass | int, mode: str = "sample") -> RampClass:
    code = current if isinstance(current, (int, np.integer)) else b.scheme.code(current)
    return b.scheme.label(int(predict_baseline_codes(b, np.array([code]), mode)[0]))


def predict_baseline_codes(b: TransitionBaseline, current: np.ndarray, mode: str = "sample") -> np.ndarray:
    current = np.asarray(current, dtype=np.int64)
    if mode == "argmax":
        return np.array([int(np.argmax(b.row(c))) for c in current], dtype=np.int64)
    if mode != "sample":
        raise DataError("mode must be 'sample' or 'argmax'")
    return np.array([b._rng.choice(b.scheme.n_classes, p=b.row(c)) for c in current], dtype=np.int64)


@dataclass(frozen=True)
class MajorityBaseline:
    code: int

    def predict(self, n: int) -> np.ndarray:
        return np.full(n, self.code, dtype=np.int64)


def fit_majority_baseline(y: np.ndarray, scheme: ClassScheme) -> MajorityBaseline:
    return MajorityBaseline(majority_class(np.asarray(y), scheme.n_classes))
