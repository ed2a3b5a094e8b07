"""Instance extraction: fixed-stride windows, ongoing-event masking, flattening."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    BivariateSeries, ClassScheme, DataError, RampClass, UNKNOWN_CODE,
)
from .features import FEATURE_NAMES, FeatureVector, feature_matrix

MANIFEST_SUFFIX = ".manifest.json"


@dataclass(frozen=True)
class WindowSpec:
    l: int
    h: int = 1

    def __post_init__(self) -> None:
        if self.l < 1:
            raise DataError("l must be >= 1")
        if self.h < 1:
            raise DataError("h must be >= 1")

    @property
    def stride(self) -> int:
        return self.l + self.h


@dataclass(frozen=True)
class Instance:
    powers: tuple[float, ...]
    labels: tuple[RampClass, ...]
    features: FeatureVector
    target: RampClass
    origin_idx: int

    def __post_init__(self) -> None:
        if self.target is RampClass.UNKNOWN:
            raise DataError("instance target cannot be unknown")


def column_names(l: int) -> tuple[str, ...]:
    return (tuple(f"P{k}" for k in range(l)) + tuple(f"R{k}" for k in range(l))
            + FEATURE_NAMES)


@dataclass(frozen=True)
class InstanceMatrix:
    rows: tuple[Instance, ...]
    scheme: ClassScheme
    l: int
    h: int = 1

    @property
    def column_names(self) -> tuple[str, ...]:
        return column_names(self.l)

    def __len__(self) -> int:
        return len(self.rows)

    @cached_property
    def X(self) -> np.ndarray:
        if not self.rows:
            return np.empty((0, len(self.column_names)))
        X = np.array([flatten(r, self.scheme) for r in self.rows])
        X.setflags(write=False)
        return X

    @cached_property
    def y(self) -> np.ndarray:
        y = np.array([self.scheme.code(r.target) for r in self.rows], dtype=np.int64)
        y.setflags(write=False)
        return y

    @cached_property
    def origins(self) -> np.ndarray:
        return np.array([r.origin_idx for r in self.rows], dtype=np.int64)

    def subset(self, idx: Sequence[int] | np.ndarray) -> "InstanceMatrix":
        return InstanceMatrix(tuple(self.rows[int(i)] for i in idx), self.scheme, self.l, self.h)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.scheme.n_classes)


def mask_window(window_labels: Sequence[RampClass], lookahead_label: RampClass) -> list[RampClass]:
    """Hide the trailing run of equal labels when the event continues past the window."""
    labels = list(window_labels)
    if not labels:
        return labels
    last = labels[-1]
    if last is not lookahead_label or last is RampClass.UNKNOWN:
        return labels
    k = len(labels)
    while k > 0 and labels[k - 1] is last:
        k -= 1
    return labels[:k] + [RampClass.UNKNOWN] * (len(labels) - k)


def _last_event(labels: Sequence[RampClass], w: int, l: int, masked: int) -> RampClass | None:
    """Class of the latest event already finished before the masked suffix.

    Events are runs of equal labels. Returns None when no event has finished.
    """
    if masked < l:
        return labels[w + l - masked - 1]
    run_label = labels[w]
    j = w - 1
    while j >= 0 and labels[j] is run_label:
        j -= 1
    return labels[j] if j >= 0 else None


def extract_instances(series: BivariateSeries, spec: WindowSpec, scheme: ClassScheme) -> InstanceMatrix:
    """Cut non-overlapping windows of ``l`` samples, each targeting the label ``h`` steps ahead.

    Windows start at ordinals ``0, l+h, 2(l+h), ...``. Rows for which no
    event has finished yet (no last-known event type) are dropped.
    """
    l, h = spec.l, spec.h
    n = len(series)
    if n < spec.stride:
        raise DataError(f"series of {n} samples is shorter than l+h={spec.stride}")
    if l < 2:
        raise DataError("feature extraction needs l >= 2")
    labels = [scheme.adapt(lab) for lab in series.labels]
    starts = range(0, n - spec.stride + 1, spec.stride)
    kept: list[tuple[int, list[RampClass], RampClass, RampClass]] = []
    for w in starts:
        window = labels[w:w + l]
        target = labels[w + l + h - 1]
        if RampClass.UNKNOWN in window or target is RampClass.UNKNOWN:
            raise DataError(f"unlabeled sample in window starting at {series.start_index + w}")
        masked = mask_window(window, target)
        n_masked = sum(1 for lab in masked if lab is RampClass.UNKNOWN)
        last = _last_event(labels, w, l, n_masked)
        if last is None:
            continue
        kept.append((w, masked, target, last))
    if not kept:
        return InstanceMatrix((), scheme, l, h)
    windows = np.array([series.power[w:w + l] for w, *_ in kept])
    feats = feature_matrix(windows, np.array([scheme.code(last) for *_, last in kept]))
    rows = tuple(
        Instance(tuple(float(p) for p in windows[k]), tuple(masked), FeatureVector(*map(float, feats[k])),
                 target, series.start_index + w)
        for k, (w, masked, target, _) in enumerate(kept)
    )
    return InstanceMatrix(rows, scheme, l, h)


def flatten(instance: Instance, scheme: ClassScheme) -> np.ndarray:
    """``[powers..., label codes..., features...]``; unknown labels encode as -1."""
    codes = [scheme.code(lab) for lab in instance.labels]
    return np.array([*instance.powers, *codes, *instance.features], dtype=np.float64)


def write_matrix(matrix: InstanceMatrix, path: str | Path, extra: dict | None = None) -> Path:
    """Write the matrix as CSV plus a JSON manifest beside it; returns the manifest path.

    ``extra`` entries (e.g. scaling parameters) are stored in the manifest.
    """
    path = Path(path)
    cols = matrix.column_names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("origin", *cols, "target"))
        for r, x, y in zip(matrix.rows, matrix.X, matrix.y):
            writer.writerow((r.origin_idx, *(repr(float(v)) for v in x), int(y)))
    manifest = {
        "scheme": matrix.scheme.value,
        "l": matrix.l,
        "h": matrix.h,
        "columns": ["origin", *cols, "target"],
        "n_rows": len(matrix),
        "unknown_code": UNKNOWN_CODE,
        "class_codes": {lab.value: k for k, lab in enumerate(matrix.scheme.classes)},
        **(extra or {}),
    }
    manifest_path = path.with_name(path.name + MANIFEST_SUFFIX)
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest_path


def read_manifest(path: str | Path) -> dict:
    path = Path(path)
    manifest_path = path.with_name(path.name + MANIFEST_SUFFIX)
    if not manifest_path.exists():
        raise DataError(f"missing manifest {manifest_path}")
    try:
        return json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest is not valid JSON: {exc}") from None


def read_matrix(path: str | Path) -> InstanceMatrix:
    path = Path(path)
    manifest = read_manifest(path)
    scheme = ClassScheme.parse(manifest["scheme"])
    l, h = int(manifest["l"]), int(manifest["h"])
    expected = ["origin", *column_names(l), "target"]
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected or manifest["columns"] != expected:
            raise DataError("instance matrix columns do not match the manifest layout")
        nf = len(FEATURE_NAMES)
        for lineno, rec in enumerate(reader, start=2):
            try:
                vals = [float(v) for v in rec[1:-1]]
                origin, target = int(rec[0]), int(rec[-1])
            except (ValueError, IndexError):
                raise DataError(f"line {lineno}: malformed instance row") from None
            if len(vals) != 2 * l + nf:
                raise DataError(f"line {lineno}: expected {2 * l + nf} values")
            rows.append(Instance(
                tuple(vals[:l]),
                tuple(scheme.label(int(c)) for c in vals[l:2 * l]),
                FeatureVector(*vals[2 * l:]),
                scheme.label(target),
                origin,
            ))
    return InstanceMatrix(tuple(rows), scheme, l, h)
