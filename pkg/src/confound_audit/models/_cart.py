"""Compiled CART kernels (growing, split search, prediction).

Trees are stored as flat node arrays. Split candidates are evaluated feature
by feature in ascending index order and threshold by threshold in ascending
order; a candidate replaces the incumbent only if its gain is larger by more
than ``GAIN_EPS``, so exact ties go to the lowest feature, then the lowest
threshold.
"""

import numpy as np
from numba import njit

GAIN_EPS = 1e-12

_M = np.uint64(2685821657736338717)
_S12 = np.uint64(12)
_S25 = np.uint64(25)
_S27 = np.uint64(27)
_S11 = np.uint64(11)


@njit(cache=True)
def _next_u64(state):
    # xorshift64*
    x = state[0]
    x ^= x >> _S12
    x ^= x << _S25
    x ^= x >> _S27
    state[0] = x
    return x * _M


@njit(cache=True)
def _randint(state, k):
    return np.int64((_next_u64(state) >> _S11) % np.uint64(k))


@njit(cache=True)
def _gain(classification, n, s, ss, nl, sl, ssl):
    nr = n - nl
    sr = s - sl
    if classification:
        p = s / n
        pl = sl / nl
        pr = sr / nr
        g = 2.0 * p * (1.0 - p)
        gl = 2.0 * pl * (1.0 - pl)
        gr = 2.0 * pr * (1.0 - pr)
        return g - (nl / n) * gl - (nr / n) * gr
    # variance reduction written as a difference of between-group terms
    return (sl * sl / nl + sr * sr / nr - s * s / n) / n


@njit(cache=True)
def _insertion(keys, vals, lo, hi):
    for i in range(lo + 1, hi):
        k = keys[i]
        v = vals[i]
        j = i - 1
        while j >= lo and keys[j] > k:
            keys[j + 1] = keys[j]
            vals[j + 1] = vals[j]
            j -= 1
        keys[j + 1] = k
        vals[j + 1] = v


@njit(cache=True)
def _cosort(keys, vals, n):
    """In-place sort of ``keys[:n]`` carrying ``vals`` along."""
    stack = np.empty((128, 2), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = n
    top = 1
    while top > 0:
        top -= 1
        lo = stack[top, 0]
        hi = stack[top, 1]
        while hi - lo > 16:
            mid = (lo + hi - 1) // 2
            a = keys[lo]
            b = keys[mid]
            c = keys[hi - 1]
            # median of three
            if a < b:
                pivot = b if b < c else (c if a < c else a)
            else:
                pivot = a if a < c else (c if b < c else b)
            i = lo
            j = hi - 1
            while i <= j:
                while keys[i] < pivot:
                    i += 1
                while keys[j] > pivot:
                    j -= 1
                if i <= j:
                    tk = keys[i]
                    keys[i] = keys[j]
                    keys[j] = tk
                    tv = vals[i]
                    vals[i] = vals[j]
                    vals[j] = tv
                    i += 1
                    j -= 1
            # push the larger part, keep working on the smaller one
            if j + 1 - lo < hi - i:
                stack[top, 0] = i
                stack[top, 1] = hi
                hi = j + 1
            else:
                stack[top, 0] = lo
                stack[top, 1] = j + 1
                lo = i
            top += 1
        _insertion(keys, vals, lo, hi)


@njit(cache=True)
def _best_split_feature(X, y, idx, start, end, f, classification, min_leaf,
                        best_gain, out, vbuf, ybuf, s, ss):
    """Scan every midpoint threshold of feature ``f``; update ``out`` in place.

    ``out`` holds (gain, feature, threshold); ``vbuf``/``ybuf`` are scratch
    buffers and ``s``/``ss`` the node's target sum and sum of squares.
    Returns the (possibly updated) best gain.
    """
    n = end - start
    vals = vbuf[:n]
    ys = ybuf[:n]
    for i in range(n):
        vals[i] = X[idx[start + i], f]
        ys[i] = y[idx[start + i]]
    _cosort(vals, ys, n)
    sl = 0.0
    ssl = 0.0
    for i in range(n - 1):
        yi = ys[i]
        sl += yi
        ssl += yi * yi
        nl = i + 1
        v0 = vals[i]
        v1 = vals[i + 1]
        if v1 <= v0:
            continue
        if nl < min_leaf or n - nl < min_leaf:
            continue
        g = _gain(classification, float(n), s, ss, float(nl), sl, ssl)
        if g > best_gain + GAIN_EPS:
            best_gain = g
            thr = v0 + (v1 - v0) / 2.0
            if thr >= v1:
                thr = v0
            out[0] = g
            out[1] = f
            out[2] = thr
    return best_gain


@njit(cache=True)
def _node_is_constant(X, idx, start, end, f):
    v = X[idx[start], f]
    for i in range(start + 1, end):
        if X[idx[i], f] != v:
            return False
    return True


@njit(cache=True)
def grow_tree(X, y, sample_idx, classification, max_depth, min_leaf, mtry, rng_state):
    """Grow one CART tree on the rows ``sample_idx`` (duplicates allowed).

    ``max_depth < 0`` means unlimited; ``mtry >= p`` evaluates all features.
    Returns ``(feature, threshold, left, right, value, n_samples, depth,
    impurity, gain)`` arrays with ``feature == -1`` marking leaves.
    """
    n_total = sample_idx.shape[0]
    p = X.shape[1]
    cap = 2 * n_total + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    n_samples = np.zeros(cap, dtype=np.int64)
    depth_arr = np.zeros(cap, dtype=np.int64)
    impurity = np.zeros(cap)
    gain_arr = np.zeros(cap)

    idx = sample_idx.copy()
    # explicit stack of (node, start, end, depth)
    stack = np.empty((cap, 4), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n_total
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    feats = np.arange(p)
    chosen = np.empty(p, dtype=np.int64)
    out = np.zeros(3)
    vbuf = np.empty(n_total)
    ybuf = np.empty(n_total)

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        n = end - start
        s = 0.0
        ss = 0.0
        ymin = np.inf
        ymax = -np.inf
        for i in range(start, end):
            yi = y[idx[i]]
            s += yi
            ss += yi * yi
            if yi < ymin:
                ymin = yi
            if yi > ymax:
                ymax = yi
        mean = s / n
        value[node] = mean
        n_samples[node] = n
        depth_arr[node] = depth
        if classification:
            impurity[node] = 2.0 * mean * (1.0 - mean)
        else:
            var = ss / n - mean * mean
            impurity[node] = var if var > 0.0 else 0.0

        if ymax <= ymin:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue
        if n < 2 * min_leaf:
            continue

        # candidate features
        n_chosen = 0
        if mtry >= p:
            for f in range(p):
                chosen[n_chosen] = f
                n_chosen += 1
        else:
            for f in range(p):
                feats[f] = f
            remaining = p
            while remaining > 0 and n_chosen < mtry:
                r = _randint(rng_state, remaining)
                f = feats[r]
                feats[r] = feats[remaining - 1]
                feats[remaining - 1] = f
                remaining -= 1
                if not _node_is_constant(X, idx, start, end, f):
                    chosen[n_chosen] = f
                    n_chosen += 1
            chosen[:n_chosen] = np.sort(chosen[:n_chosen])

        best = -np.inf
        out[1] = -1.0
        for k in range(n_chosen):
            best = _best_split_feature(X, y, idx, start, end, chosen[k],
                                       classification, min_leaf, best, out,
                                       vbuf, ybuf, s, ss)
        if out[1] < 0:
            continue
        f = np.int64(out[1])
        thr = out[2]

        # partition idx[start:end] so rows with x <= thr come first
        i = start
        j = end - 1
        while i <= j:
            if X[idx[i], f] <= thr:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        mid = i

        feature[node] = f
        threshold[node] = thr
        gain_arr[node] = out[0]
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        stack[top, 0] = rnode
        stack[top, 1] = mid
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lnode
        stack[top, 1] = start
        stack[top, 2] = mid
        stack[top, 3] = depth + 1
        top += 1

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], n_samples[:n_nodes], depth_arr[:n_nodes],
            impurity[:n_nodes], gain_arr[:n_nodes])


@njit(cache=True)
def predict_tree(feature, threshold, left, right, value, X):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@njit(cache=True)
def root_split(X, y, classification, min_leaf):
    """Best (gain, feature, threshold) over all features at the root."""
    n = X.shape[0]
    idx = np.arange(n)
    out = np.zeros(3)
    out[1] = -1.0
    best = -np.inf
    s = 0.0
    ss = 0.0
    for i in range(n):
        s += y[i]
        ss += y[i] * y[i]
    vbuf = np.empty(n)
    ybuf = np.empty(n)
    for f in range(X.shape[1]):
        best = _best_split_feature(X, y, idx, 0, n, f, classification, min_leaf, best, out,
                                   vbuf, ybuf, s, ss)
    return out
