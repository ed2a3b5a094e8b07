"""Compiled CART builder and traversal used by :mod:`rampcast.learners`.

Samples are presorted once per feature; each node owns the slice
``order[:, start:end]`` and splitting stably partitions every feature row,
so a node's samples stay sorted for all features.
"""

import math

import numpy as np
from numba import njit

GINI, ENTROPY, LOG_LOSS = 0, 1, 2
_LN2 = math.log(2.0)


@njit(cache=True)
def _impurity(cw, total, criterion):
    if total <= 0.0:
        return 0.0
    acc = 0.0
    if criterion == GINI:
        for c in range(cw.shape[0]):
            p = cw[c] / total
            acc += p * p
        return 1.0 - acc
    for c in range(cw.shape[0]):
        if cw[c] > 0.0:
            p = cw[c] / total
            acc -= p * math.log(p)
    if criterion == ENTROPY:
        return acc / _LN2
    return acc


@njit(cache=True)
def _term(x, criterion):
    if criterion == GINI:
        return x * x
    if x > 0.0:
        return x * math.log(x)
    return 0.0


@njit(cache=True)
def _side_cost(weight, acc, criterion):
    """Weight times impurity of one side (entropy in nats) from its running term."""
    if weight <= 0.0:
        return 0.0
    if criterion == GINI:
        return weight - acc / weight
    return weight * math.log(weight) - acc


@njit(cache=True)
def build_tree(X, y, w, order_in, n_classes, max_depth, min_split, min_leaf, criterion, rel_tol):
    n, d = X.shape
    order = order_in.copy()
    cap = 2 * n - 1
    if max_depth < 30:
        cap = min(cap, 2 ** (max_depth + 1) - 1)
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros((cap, n_classes))
    impurity = np.zeros(cap)
    weighted_n = np.zeros(cap)
    n_samples = np.zeros(cap, dtype=np.int64)
    decrease = np.zeros(cap)

    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(n, dtype=np.int64)
    cw = np.zeros(n_classes)
    lw = np.zeros(n_classes)
    rw = np.zeros(n_classes)
    tl = np.zeros(n_classes)
    tr = np.zeros(n_classes)

    # stack entries: node id, start, end, depth
    stack = np.empty((cap, 4), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start

        cw[:] = 0.0
        for p in range(start, end):
            i = order[0, p]
            cw[y[i]] += w[i]
        total = cw.sum()
        imp = _impurity(cw, total, criterion)
        n_samples[node] = m
        weighted_n[node] = total
        impurity[node] = imp
        if total > 0.0:
            for c in range(n_classes):
                value[node, c] = cw[c] / total
        else:
            for c in range(n_classes):
                value[node, c] = 1.0 / n_classes

        if depth >= max_depth or m < min_split or m < 2 * min_leaf or imp <= rel_tol or total <= 0.0:
            continue

        parent_cost = total * imp
        if criterion == ENTROPY:
            parent_cost *= _LN2
        best_cost = np.inf
        best_f = -1
        best_pos = -1
        best_thr = 0.0
        tol = rel_tol * total
        for f in range(d):
            if not X[order[f, start], f] < X[order[f, end - 1], f]:
                continue
            # running per-side terms: gini tracks sum of squared class weights,
            # entropy tracks sum of w*ln(w) over classes; they are only needed
            # once the left side reaches min_leaf rows
            wl = 0.0
            for c in range(n_classes):
                lw[c] = 0.0
                rw[c] = cw[c]
            first = start + min_leaf - 1
            for p in range(start, first):
                i = order[f, p]
                lw[y[i]] += w[i]
                rw[y[i]] -= w[i]
                wl += w[i]
            sl = 0.0
            sr = 0.0
            for c in range(n_classes):
                if rw[c] < 0.0:
                    rw[c] = 0.0
                tl[c] = _term(lw[c], criterion)
                tr[c] = _term(rw[c], criterion)
                sl += tl[c]
                sr += tr[c]
            for p in range(first, end - 1):
                i = order[f, p]
                c = y[i]
                wi = w[i]
                lw[c] += wi
                rw[c] -= wi
                if rw[c] < 0.0:
                    rw[c] = 0.0
                t = _term(lw[c], criterion)
                sl += t - tl[c]
                tl[c] = t
                t = _term(rw[c], criterion)
                sr += t - tr[c]
                tr[c] = t
                wl += wi
                n_left = p - start + 1
                if m - n_left < min_leaf:
                    break
                xa = X[i, f]
                xb = X[order[f, p + 1], f]
                if not xa < xb:
                    continue
                wr = total - wl
                if wr < 0.0:
                    wr = 0.0
                cost = _side_cost(wl, sl, criterion) + _side_cost(wr, sr, criterion)
                if cost < best_cost - tol:
                    best_cost = cost
                    best_f = f
                    best_pos = p
                    thr = xa / 2.0 + xb / 2.0
                    if thr >= xb or not math.isfinite(thr):
                        thr = xa
                    best_thr = thr
        if best_f < 0 or parent_cost - best_cost <= tol:
            continue

        n_left = best_pos - start + 1
        for p in range(start, end):
            goes_left[order[best_f, p]] = p <= best_pos
        for f in range(d):
            a = start
            b = 0
            for p in range(start, end):
                i = order[f, p]
                if goes_left[i]:
                    order[f, a] = i
                    a += 1
                else:
                    buf[b] = i
                    b += 1
            for q in range(b):
                order[f, a + q] = buf[q]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        decrease[node] = parent_cost - best_cost
        if criterion == ENTROPY:
            decrease[node] /= _LN2
        # push right first so the left subtree is numbered depth-first
        stack[top, 0] = rid
        stack[top, 1] = start + n_left
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lid
        stack[top, 1] = start
        stack[top, 2] = start + n_left
        stack[top, 3] = depth + 1
        top += 1

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], impurity[:n_nodes], weighted_n[:n_nodes], n_samples[:n_nodes],
            decrease[:n_nodes])


@njit(cache=True)
def apply_tree(X, feature, threshold, left, right):
    out = np.empty(X.shape[0], dtype=np.int64)
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out
