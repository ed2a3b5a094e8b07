"""Straight-line reference implementations used to cross-check the library.

These are deliberately naive (loops, stdlib only where possible) and share
no code with :mod:`rampcast`.
"""

from __future__ import annotations

import math
import statistics


def brute_metrics(truth, pred, n_classes):
    n = len(truth)
    correct = sum(1 for t, p in zip(truth, pred) if t == p)
    recalls, f1s, supports = [], [], []
    for c in range(n_classes):
        tp = sum(1 for t, p in zip(truth, pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(truth, pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(truth, pred) if t == c and p != c)
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        if support:
            recalls.append(recall)
        f1s.append(f1)
        supports.append(support)
    p_o = correct / n
    p_e = 0.0
    for c in range(n_classes):
        p_e += (sum(1 for t in truth if t == c) / n) * (sum(1 for p in pred if p == c) / n)
    kappa = 1.0 if p_e == 1.0 else (p_o - p_e) / (1 - p_e)
    return {
        "accuracy": p_o,
        "balanced_accuracy": sum(recalls) / len(recalls),
        "kappa": kappa,
        "weighted_f1": sum(s / n * f for s, f in zip(supports, f1s)),
    }


def brute_mask(labels, lookahead, unknown):
    """Scan from the window's right edge; hide every label of the final run
    when that run is still going at the look-ahead sample."""
    out = list(labels)
    if not out or out[-1] != lookahead or out[-1] == unknown:
        return out
    for k in range(len(out) - 1, -1, -1):
        if labels[k] != labels[-1]:
            break
        out[k] = unknown
    return out


def lz76_naive(s: str) -> int:
    """Exhaustive-history LZ76 parsing: each phrase is the shortest block
    not seen as a substring of everything before its last symbol."""
    n, i, c = len(s), 0, 0
    while i < n:
        k = 1
        while i + k <= n and s[i:i + k] in s[:i + k - 1]:
            k += 1
        c += 1
        i += k
    return c


def _percentile(xs, q):
    xs = sorted(xs)
    pos = (len(xs) - 1) * q
    lo = math.floor(pos)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (xs[hi] - xs[lo]) * (pos - lo)


def naive_features(window, last_event_code):
    """The 21 descriptors, each written out directly from its definition."""
    x = [float(v) for v in window]
    n = len(x)
    d = [x[k + 1] - x[k] for k in range(n - 1)]
    mean = sum(x) / n
    med = statistics.median(x)
    counts = {}
    for v in x:
        counts[v] = counts.get(v, 0) + 1
    entropy = -sum(c / n * math.log2(c / n) for c in counts.values()) if len(counts) > 1 else 0.0
    bits = "".join("1" if v > med else "0" for v in x)
    sign_changes = sum(1 for k in range(len(d) - 1) if d[k] * d[k + 1] < 0)
    minima = sum(1 for k in range(1, n - 1) if x[k] < x[k - 1] and x[k] < x[k + 1])
    maxima = sum(1 for k in range(1, n - 1) if x[k] > x[k - 1] and x[k] > x[k + 1])
    t_mean = (n - 1) / 2
    slope = (sum((k - t_mean) * (x[k] - mean) for k in range(n))
             / sum((k - t_mean) ** 2 for k in range(n)))
    pfd = math.log10(n) / (math.log10(n) + math.log10(n / (n + 0.4 * sign_changes)))
    return [
        max(x), mean, med, min(x),
        sum((v - mean) ** 2 for v in x) / n,
        sum(math.sqrt(1 + dd * dd) for dd in d),
        entropy,
        _percentile(x, 0.75) - _percentile(x, 0.25),
        lz76_naive(bits) / n,
        sum(abs(v - mean) for v in x) / n,
        statistics.median([abs(v - mean) for v in x]),
        sum(abs(dd) for dd in d) / len(d),
        sum(d) / len(d),
        statistics.median([abs(dd) for dd in d]),
        statistics.median(d),
        float(minima), float(maxima),
        pfd,
        math.sqrt(sum(v * v for v in x) / n),
        slope,
        float(last_event_code),
    ]


def best_stump(X, y, w, n_classes, min_leaf):
    """Exhaustive weighted-gini search over every feature and every midpoint."""
    n, d = len(X), len(X[0])

    def cost(rows):
        tot = sum(w[i] for i in rows)
        if tot == 0:
            return 0.0
        acc = 0.0
        for c in range(n_classes):
            p = sum(w[i] for i in rows if y[i] == c) / tot
            acc += p * p
        return tot * (1 - acc)

    best = (math.inf, None, None)
    for f in range(d):
        values = sorted({X[i][f] for i in range(n)})
        for a, b in zip(values, values[1:]):
            thr = a / 2 + b / 2
            left = [i for i in range(n) if X[i][f] <= thr]
            right = [i for i in range(n) if X[i][f] > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            c = cost(left) + cost(right)
            if c < best[0] - 1e-12 * sum(w):
                best = (c, f, thr)
    return best
