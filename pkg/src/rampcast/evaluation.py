"""Multi-class metrics, stratified splitting, random search and the benchmark harness."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .core import BivariateSeries, ClassScheme, DataError
from .imbalance import (
    EasyConfig, fit_easy_ensemble, fit_easy_ensemble_arrays, fit_majority_baseline,
    fit_transition_pairs, predict_baseline_codes,
)
from .preprocess import InstanceMatrix, WindowSpec, extract_instances
from .seeding import DEFAULT_SEED, derive_seed, rng_for

LAST_EVENT_COLUMN = "last_event_code"


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with truth on rows and prediction on columns."""

    counts: np.ndarray
    scheme: ClassScheme

    def normalized(self) -> np.ndarray:
        sums = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, sums, out=np.zeros_like(self.counts, dtype=np.float64),
                         where=sums > 0)

    def to_csv(self, path: str | Path, normalize: bool = True) -> None:
        data = self.normalized() if normalize else self.counts
        names = [c.value for c in self.scheme.classes]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["truth\\pred", *names])
            for name, row in zip(names, data):
                writer.writerow([name, *(f"{v:.12g}" for v in row)])


@dataclass(frozen=True)
class ClassStats:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    balanced_accuracy: float
    kappa: float
    weighted_f1: float
    per_class: dict[str, ClassStats]
    train_seconds: float | None = None
    predict_seconds: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _check_pair(truth: Sequence[int], pred: Sequence[int], scheme: ClassScheme) -> tuple[np.ndarray, np.ndarray]:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape or truth.ndim != 1:
        raise DataError("truth and prediction lengths differ")
    if truth.size == 0:
        raise DataError("no predictions to score")
    c = scheme.n_classes
    for arr in (truth, pred):
        if arr.min() < 0 or arr.max() >= c:
            raise DataError("label code outside the class scheme")
    return truth, pred


def confusion(truth: Sequence[int], pred: Sequence[int], scheme: ClassScheme) -> ConfusionMatrix:
    truth, pred = _check_pair(truth, pred, scheme)
    c = scheme.n_classes
    counts = np.bincount(truth * c + pred, minlength=c * c).reshape(c, c)
    return ConfusionMatrix(counts, scheme)


def compute_metrics(truth: Sequence[int], pred: Sequence[int], scheme: ClassScheme) -> MetricsReport:
    """Accuracy, balanced accuracy (classes present in truth), Cohen's kappa
    and support-weighted F1 (zero F1 when precision + recall is zero)."""
    cm = confusion(truth, pred, scheme).counts.astype(np.float64)
    n = cm.sum()
    tp = np.diag(cm)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    accuracy = tp.sum() / n
    balanced = recall[support > 0].mean()
    p_e = float((support * predicted).sum() / (n * n))
    kappa = 1.0 if p_e == 1.0 else (accuracy - p_e) / (1.0 - p_e)
    weighted_f1 = float((support / n * f1).sum())
    per_class = {cls.value: ClassStats(float(precision[k]), float(recall[k]), float(f1[k]), int(support[k]))
                 for k, cls in enumerate(scheme.classes)}
    return MetricsReport(float(accuracy), float(balanced), float(kappa), weighted_f1, per_class)


def class_entropy_percent(y: np.ndarray, n_classes: int) -> float:
    """Shannon entropy of the class distribution as a percentage of log(C)."""
    counts = np.bincount(np.asarray(y, dtype=np.int64), minlength=n_classes)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum() / math.log(n_classes) * 100.0)


def _largest_remainder(counts: np.ndarray, frac: float) -> np.ndarray:
    """Per-class allocation of ``round(frac * N)`` rows, each within 1 of ``frac * n_c``."""
    exact = counts * frac
    alloc = np.floor(exact).astype(np.int64)
    short = int(round(frac * counts.sum())) - int(alloc.sum())
    order = np.lexsort((np.arange(counts.size), -(exact - alloc)))
    for k in order[:max(short, 0)]:
        alloc[k] += 1
    return alloc


def holdout_split(matrix: InstanceMatrix, train_frac: float = 0.8, seed: int = DEFAULT_SEED,
                  chronological: bool = False) -> tuple[InstanceMatrix, InstanceMatrix]:
    """Stratified random train/test split (or a time-ordered cut)."""
    if len(matrix) < 5:
        raise DataError("hold-out split needs at least 5 rows")
    if not 0 < train_frac < 1:
        raise DataError("train_frac must lie in (0, 1)")
    if chronological:
        order = np.argsort(matrix.origins, kind="stable")
        cut = int(round(train_frac * len(matrix)))
        return matrix.subset(np.sort(order[:cut])), matrix.subset(np.sort(order[cut:]))
    y = matrix.y
    counts = np.bincount(y, minlength=matrix.scheme.n_classes)
    if np.any((counts > 0) & (counts < 2)):
        raise DataError("every present class needs at least 2 rows for a stratified split")
    n_test = _largest_remainder(counts, 1.0 - train_frac)
    n_test = np.clip(n_test, np.minimum(counts, 1), np.maximum(counts - 1, 0))
    rng = rng_for(seed, "holdout")
    test = []
    for c in range(counts.size):
        rows = np.flatnonzero(y == c)
        if rows.size:
            test.append(rng.permutation(rows)[:n_test[c]])
    test_idx = np.sort(np.concatenate(test)) if test else np.empty(0, dtype=np.int64)
    train_idx = np.setdiff1d(np.arange(len(matrix)), test_idx)
    return matrix.subset(train_idx), matrix.subset(test_idx)


def stratified_kfold(y: np.ndarray, k: int = 5, seed: int = DEFAULT_SEED) -> list[tuple[np.ndarray, np.ndarray]]:
    """Return ``k`` (train, validation) index pairs with per-fold class counts within 1 of N_c/k."""
    y = np.asarray(y, dtype=np.int64)
    if k < 2:
        raise DataError("k must be >= 2")
    counts = np.bincount(y)
    if np.any((counts > 0) & (counts < k)):
        raise DataError(f"every present class needs at least k={k} rows")
    rng = rng_for(seed, "kfold")
    # deal each class's shuffled rows round-robin, continuing where the previous class stopped
    ordered = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in range(counts.size)])
    fold_of = np.empty(y.size, dtype=np.int64)
    fold_of[ordered] = np.arange(y.size) % k
    all_idx = np.arange(y.size)
    return [(all_idx[fold_of != f], all_idx[fold_of == f]) for f in range(k)]


@dataclass(frozen=True)
class SearchSpace:
    max_depth: tuple[int, int] = (1, 10)
    estimators: tuple[int, int] = (1, 200)
    criteria: tuple[str, ...] = ("log_loss", "gini", "entropy")
    min_samples_split: tuple[float, float] = (0.0, 1.0)  # (lo, hi]
    min_samples_leaf: tuple[float, float] = (0.0, 1.0)  # (lo, hi)
    learning_rate: tuple[float, float] = (1.0, 5.0)
    iterations: int = 75

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise DataError("iterations must be >= 1")
        if self.max_depth[0] < 1 or self.max_depth[0] > self.max_depth[1]:
            raise DataError("infeasible max_depth domain")
        if self.estimators[0] < 1 or self.estimators[0] > self.estimators[1]:
            raise DataError("infeasible estimators domain")
        if not self.criteria:
            raise DataError("no criteria to sample")
        lo, hi = self.min_samples_split
        if not 0 <= lo <= hi <= 1:
            raise DataError("infeasible min_samples_split domain")
        lo, hi = self.min_samples_leaf
        if not 0 <= lo <= hi <= 1 or lo == 1:
            raise DataError("infeasible min_samples_leaf domain")
        if not 0 < self.learning_rate[0] <= self.learning_rate[1]:
            raise DataError("infeasible learning_rate domain")

    @classmethod
    def single_point(cls, cfg: EasyConfig) -> "SearchSpace":
        t = cfg.tree
        return cls((t.max_depth,) * 2, (cfg.n_subsets,) * 2, (t.criterion,),
                   (t.min_samples_split,) * 2, (t.min_samples_leaf,) * 2,
                   (cfg.learning_rate,) * 2, 1)

    def sample(self, rng: np.random.Generator, template: EasyConfig) -> EasyConfig:
        def open_low(lo: float, hi: float) -> float:
            # uniform on (lo, hi]
            return hi if lo == hi else hi - (hi - lo) * rng.random()

        def open_both(lo: float, hi: float) -> float:
            if lo == hi:
                return lo
            while True:
                v = lo + (hi - lo) * rng.random()
                if v > lo:
                    return v

        depth = int(rng.integers(self.max_depth[0], self.max_depth[1] + 1))
        n_subsets = int(rng.integers(self.estimators[0], self.estimators[1] + 1))
        criterion = self.criteria[int(rng.integers(len(self.criteria)))]
        split = open_low(*self.min_samples_split)
        leaf = open_both(*self.min_samples_leaf)
        lr = float(rng.uniform(*self.learning_rate)) if self.learning_rate[0] < self.learning_rate[1] \
            else self.learning_rate[0]
        tree = replace(template.tree, max_depth=depth, criterion=criterion,
                       min_samples_split=split, min_samples_leaf=leaf)
        return replace(template, n_subsets=n_subsets, tree=tree, learning_rate=lr)


@dataclass(frozen=True)
class Trial:
    index: int
    config: EasyConfig
    fold_scores: tuple[float, ...]

    @property
    def score(self) -> float:
        return float(np.mean(self.fold_scores))


@dataclass(frozen=True)
class SearchResult:
    best: EasyConfig
    best_score: float
    trials: tuple[Trial, ...]

    def write_log(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["trial", "max_depth", "n_subsets", "n_estimators", "criterion",
                             "min_samples_split", "min_samples_leaf", "learning_rate", "mean_cv_weighted_f1"])
            for t in self.trials:
                c = t.config
                writer.writerow([t.index, c.tree.max_depth, c.n_subsets, c.n_estimators, c.tree.criterion,
                                 repr(c.tree.min_samples_split), repr(c.tree.min_samples_leaf),
                                 repr(c.learning_rate), repr(t.score)])


def cross_val_score(matrix: InstanceMatrix, cfg: EasyConfig, folds: list[tuple[np.ndarray, np.ndarray]]
                    ) -> tuple[float, ...]:
    """Weighted F1 on each validation fold."""
    X, y = matrix.X, matrix.y
    n_classes = matrix.scheme.n_classes
    scores = []
    for f, (tr, va) in enumerate(folds):
        fold_cfg = replace(cfg, seed=derive_seed(cfg.seed, "fold", f))
        ytr = y[tr]
        if np.unique(ytr).size < 2:
            raise DataError("a training fold holds a single class")
        _, members, _ = fit_easy_ensemble_arrays(X[tr], ytr, n_classes, fold_cfg)
        votes = np.zeros((va.size, n_classes))
        for m in members:
            votes += m.decision_scores(X[va])
        scores.append(compute_metrics(y[va], np.argmax(votes, axis=1), matrix.scheme).weighted_f1)
    return tuple(scores)


def random_search(matrix: InstanceMatrix, space: SearchSpace, template: EasyConfig,
                  seed: int = DEFAULT_SEED, k: int = 5, jobs: int = 1) -> SearchResult:
    """Uniform random search maximizing mean k-fold weighted F1.

    Candidates and folds depend only on ``seed``; ties keep the earliest trial.
    """
    rng = rng_for(seed, "search")
    candidates = [replace(space.sample(rng, template), seed=derive_seed(seed, "trial", i))
                  for i in range(space.iterations)]
    folds = stratified_kfold(matrix.y, k, derive_seed(seed, "cv"))
    if jobs == 1:
        scores = [cross_val_score(matrix, c, folds) for c in candidates]
    else:
        scores = Parallel(n_jobs=jobs)(delayed(cross_val_score)(matrix, c, folds) for c in candidates)
    trials = tuple(Trial(i, c, s) for i, (c, s) in enumerate(zip(candidates, scores)))
    best = max(trials, key=lambda t: (t.score, -t.index))
    return SearchResult(best.config, best.score, trials)


def majority_metrics(train: InstanceMatrix, test: InstanceMatrix) -> MetricsReport:
    base = fit_majority_baseline(train.y, train.scheme)
    return compute_metrics(test.y, base.predict(len(test)), test.scheme)


def transition_metrics(train: InstanceMatrix, test: InstanceMatrix, seed: int,
                       mode: str = "sample") -> MetricsReport:
    """Baseline forecasting the next event from the row's last known event type."""
    col = train.column_names.index(LAST_EVENT_COLUMN)
    base = fit_transition_pairs(train.X[:, col].astype(np.int64), train.y, train.scheme, seed)
    t0 = time.perf_counter()
    pred = predict_baseline_codes(base, test.X[:, col].astype(np.int64), mode)
    elapsed = time.perf_counter() - t0
    return replace(compute_metrics(test.y, pred, test.scheme), predict_seconds=elapsed)


def evaluate_model(model, test: InstanceMatrix, train_seconds: float | None = None) -> MetricsReport:
    t0 = time.perf_counter()
    pred = model.predict(test.X)
    elapsed = time.perf_counter() - t0
    return replace(compute_metrics(test.y, pred, test.scheme),
                   train_seconds=train_seconds, predict_seconds=elapsed)


@dataclass
class BenchmarkResult:
    l: int
    scheme: ClassScheme
    class_entropy_percent: float
    n_train: int
    n_test: int
    model: MetricsReport
    transition: MetricsReport
    majority: MetricsReport
    search: SearchResult | None = None
    best_config: EasyConfig | None = None
    confusion: ConfusionMatrix | None = field(default=None, repr=False)

    def row(self) -> dict:
        return {
            "lag": self.l,
            "shannon_entropy_pct": self.class_entropy_percent,
            "accuracy": self.model.accuracy,
            "balanced_accuracy": self.model.balanced_accuracy,
            "kappa": self.model.kappa,
            "weighted_f1": self.model.weighted_f1,
        }


def run_benchmark(series: BivariateSeries, scheme: ClassScheme, l: int, seed: int,
                  config: EasyConfig | None = None, space: SearchSpace | None = None,
                  h: int = 1, k: int = 5, train_frac: float = 0.8, jobs: int = 1,
                  chronological: bool = False) -> BenchmarkResult:
    """Instances -> stratified hold-out -> (optional) random search on the
    training part -> retrain -> test metrics for the model and both baselines."""
    matrix = extract_instances(series, WindowSpec(l, h), scheme)
    train, test = holdout_split(matrix, train_frac, derive_seed(seed, "holdout"), chronological)
    template = config or EasyConfig.tuned_defaults(scheme, seed)
    template = replace(template, seed=derive_seed(seed, "model"))
    search = None
    if space is not None:
        search = random_search(train, space, template, derive_seed(seed, "search"), k, jobs)
        template = replace(search.best, seed=derive_seed(seed, "model"))
    t0 = time.perf_counter()
    model = fit_easy_ensemble(train, template, jobs)
    train_seconds = time.perf_counter() - t0
    report = evaluate_model(model, test, train_seconds)
    cm = confusion(test.y, model.predict(test.X), scheme)
    return BenchmarkResult(
        l, scheme, class_entropy_percent(matrix.y, scheme.n_classes), len(train), len(test),
        report, transition_metrics(train, test, derive_seed(seed, "baseline")),
        majority_metrics(train, test), search, template, cm,
    )


def lag_report(series: BivariateSeries, scheme: ClassScheme, lags: Sequence[int], seed: int,
               config: EasyConfig | None = None, space: SearchSpace | None = None,
               jobs: int = 1) -> list[BenchmarkResult]:
    return [run_benchmark(series, scheme, l, seed, config, space, jobs=jobs) for l in lags]


def format_lag_table(results: Sequence[BenchmarkResult]) -> str:
    header = ("lag", "shannon_entropy_pct", "accuracy", "balanced_accuracy", "kappa", "weighted_f1")
    lines = [",".join(header)]
    for r in results:
        row = r.row()
        lines.append(",".join([str(row["lag"])] + [f"{row[k]:.6f}" for k in header[1:]]))
    return "\n".join(lines)


__all__ = [
    "BenchmarkResult", "ConfusionMatrix", "MetricsReport", "SearchResult", "SearchSpace", "Trial",
    "class_entropy_percent", "compute_metrics", "confusion", "cross_val_score", "evaluate_model",
    "format_lag_table", "holdout_split", "lag_report", "random_search", "run_benchmark",
    "stratified_kfold",
]
