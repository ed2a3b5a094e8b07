"""Statistical descriptors of a power window.

Every function works on the raw (unscaled) window values. ``feature_matrix``
is the batched path used to build instance matrices; ``extract_features``
computes the same thing for a single window.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .core import DataError, UNKNOWN_CODE


class FeatureVector(NamedTuple):
    max: float
    mean: float
    median: float
    min: float
    variance: float
    signal_distance: float
    shannon_entropy: float
    iqr: float
    lz_complexity: float
    mean_abs_dev: float
    median_abs_dev: float
    mean_abs_diff: float
    mean_diff: float
    median_abs_diff: float
    median_diff: float
    neg_turning_points: float
    pos_turning_points: float
    petrosian_fd: float
    rms: float
    slope: float
    last_event_code: float


FEATURE_NAMES: tuple[str, ...] = FeatureVector._fields


def shannon_entropy(window: Sequence[float]) -> float:
    """Entropy in bits of the empirical distribution of distinct values."""
    x = np.asarray(window, dtype=np.float64)
    if x.size == 0:
        raise DataError("entropy of an empty window")
    _, counts = np.unique(x, return_counts=True)
    if counts.size == 1:
        return 0.0
    p = counts / x.size
    return float(-(p * np.log2(p)).sum())


def lz76_phrases(bits: str) -> int:
    """Number of phrases in the Lempel-Ziv (1976) parsing of ``bits``.

    Kaspar-Schuster scan.
    """
    n = len(bits)
    if n == 0:
        return 0
    if n == 1:
        return 1
    c, i, k, k_max, step = 1, 0, 1, 1, 1
    while True:
        if bits[i + k - 1] == bits[step + k - 1]:
            k += 1
            if step + k > n:
                c += 1
                break
        else:
            k_max = max(k, k_max)
            i += 1
            if i == step:
                c += 1
                step += k_max
                if step + 1 > n:
                    break
                i, k, k_max = 0, 1, 1
            else:
                k = 1
    return c


def lz_complexity(window: Sequence[float]) -> float:
    """LZ76 phrase count of the above-median binarization, divided by ``l``."""
    x = np.asarray(window, dtype=np.float64)
    if x.size == 0:
        raise DataError("LZ complexity of an empty window")
    med = np.median(x)
    bits = "".join("1" if v > med else "0" for v in x)
    return lz76_phrases(bits) / x.size


def _sign_changes(diff: np.ndarray) -> np.ndarray:
    return (diff[..., :-1] * diff[..., 1:] < 0).sum(axis=-1)


def petrosian_fd(window: Sequence[float]) -> float:
    x = np.asarray(window, dtype=np.float64)
    if x.size < 3:
        raise DataError("Petrosian FD needs at least 3 samples")
    return float(_petrosian(x.size, _sign_changes(np.diff(x))))


def _petrosian(n: int, n_delta):
    log_n = np.log10(n)
    return log_n / (log_n + np.log10(n / (n + 0.4 * n_delta)))


def _turning_points(diff: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b = diff[..., :-1], diff[..., 1:]
    pos = ((a > 0) & (b < 0)).sum(axis=-1)
    neg = ((a < 0) & (b > 0)).sum(axis=-1)
    return neg, pos


def turning_points(window: Sequence[float]) -> tuple[int, int]:
    """Counts of strict local minima (negative) and maxima (positive)."""
    x = np.asarray(window, dtype=np.float64)
    if x.size < 3:
        raise DataError("turning points need at least 3 samples")
    neg, pos = _turning_points(np.diff(x))
    return int(neg), int(pos)


def slope(window: Sequence[float]) -> float:
    """Least-squares slope against abscissa ``0..l-1`` (MW per sample)."""
    x = np.asarray(window, dtype=np.float64)
    if x.size < 2:
        raise DataError("slope needs at least 2 samples")
    return float(_slopes(x[None, :])[0])


def _slopes(w: np.ndarray) -> np.ndarray:
    t = np.arange(w.shape[1], dtype=np.float64)
    tc = t - t.mean()
    return (w - w.mean(axis=1, keepdims=True)) @ tc / (tc @ tc)


def feature_matrix(windows: np.ndarray, last_event_codes: np.ndarray | None = None) -> np.ndarray:
    """Features for each row of an ``(N, l)`` array; columns follow FEATURE_NAMES."""
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim != 2:
        raise DataError("windows must be a 2-D array")
    n, l = w.shape
    if l < 2:
        raise DataError("feature extraction needs windows of at least 2 samples")
    if last_event_codes is None:
        last_event_codes = np.full(n, UNKNOWN_CODE)
    d = np.diff(w, axis=1)
    mean = w.mean(axis=1)
    dev = np.abs(w - mean[:, None])
    q25, q75 = np.percentile(w, [25, 75], axis=1)
    n_delta = _sign_changes(d)
    neg, pos = _turning_points(d)
    out = np.empty((n, len(FEATURE_NAMES)))
    out[:, 0] = w.max(axis=1)
    out[:, 1] = mean
    out[:, 2] = np.median(w, axis=1)
    out[:, 3] = w.min(axis=1)
    out[:, 4] = w.var(axis=1)
    out[:, 5] = np.sqrt(1.0 + d * d).sum(axis=1)
    out[:, 6] = [shannon_entropy(row) for row in w]
    out[:, 7] = q75 - q25
    out[:, 8] = [lz_complexity(row) for row in w]
    out[:, 9] = dev.mean(axis=1)
    out[:, 10] = np.median(dev, axis=1)
    out[:, 11] = np.abs(d).mean(axis=1)
    out[:, 12] = d.mean(axis=1)
    out[:, 13] = np.median(np.abs(d), axis=1)
    out[:, 14] = np.median(d, axis=1)
    out[:, 15] = neg
    out[:, 16] = pos
    out[:, 17] = _petrosian(l, n_delta)
    out[:, 18] = np.sqrt((w * w).mean(axis=1))
    out[:, 19] = _slopes(w)
    out[:, 20] = np.asarray(last_event_codes, dtype=np.float64)
    return out


def extract_features(window_powers: Sequence[float], last_event_code: int = UNKNOWN_CODE) -> FeatureVector:
    row = feature_matrix(np.asarray(window_powers, dtype=np.float64)[None, :],
                         np.array([last_event_code]))[0]
    return FeatureVector(*(float(v) for v in row))
