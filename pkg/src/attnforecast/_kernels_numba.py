"""Numba-compiled twins of the kernels in ``_kernels_numpy``."""

from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)


@njit(cache=True, nogil=True)
def window_stats(t, values, lo, hi, t0):
    n_win = lo.shape[0]
    n_ch = values.shape[1]
    out = np.zeros((n_win, n_ch, 5))
    for w in range(n_win):
        a = lo[w]
        b = hi[w]
        if b <= a:
            continue
        cnt = b - a
        tsum = 0.0
        for i in range(a, b):
            tsum += t[i] - t0[w]
        tmean = tsum / cnt
        denom = 0.0
        for i in range(a, b):
            tc = (t[i] - t0[w]) - tmean
            denom += tc * tc
        for c in range(n_ch):
            vmin = values[a, c]
            vmax = values[a, c]
            s = 0.0
            for i in range(a, b):
                v = values[i, c]
                s += v
                if v < vmin:
                    vmin = v
                if v > vmax:
                    vmax = v
            mean = s / cnt
            if mean < vmin:
                mean = vmin
            if mean > vmax:
                mean = vmax
            ss = 0.0
            sxy = 0.0
            for i in range(a, b):
                dv = values[i, c] - mean
                ss += dv * dv
                sxy += ((t[i] - t0[w]) - tmean) * dv
            out[w, c, 0] = mean
            out[w, c, 1] = vmin
            out[w, c, 2] = vmax
            out[w, c, 3] = np.sqrt(ss / cnt)
            out[w, c, 4] = sxy / denom if denom > 0.0 else 0.0
    return out


@njit(cache=True, nogil=True)
def idt_fixations(t, x, y, valid, max_dispersion, min_duration, max_gap):
    n = t.shape[0]
    starts = np.empty(n, dtype=np.int64)
    ends = np.empty(n, dtype=np.int64)
    n_fix = 0
    i = 0
    while i < n:
        if not valid[i]:
            i += 1
            continue
        xmin = x[i]
        xmax = x[i]
        ymin = y[i]
        ymax = y[i]
        j = i
        k = i + 1
        gap_from = -1
        while k < n:
            if not valid[k]:
                if gap_from < 0:
                    gap_from = k
                k += 1
                continue
            if gap_from >= 0 and t[k] - t[gap_from] > max_gap:
                break
            nxmin = min(xmin, x[k])
            nxmax = max(xmax, x[k])
            nymin = min(ymin, y[k])
            nymax = max(ymax, y[k])
            if (nxmax - nxmin) + (nymax - nymin) > max_dispersion:
                break
            xmin = nxmin
            xmax = nxmax
            ymin = nymin
            ymax = nymax
            j = k
            gap_from = -1
            k += 1
        if t[j] - t[i] >= min_duration:
            starts[n_fix] = i
            ends[n_fix] = j
            n_fix += 1
            i = j + 1
        else:
            i += 1
    return starts[:n_fix].copy(), ends[:n_fix].copy()


@njit(cache=True, nogil=True)
def _hash_uniform_scalar(key, counter):
    z = counter + key + _GOLDEN
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    z = z ^ (z >> _S31)
    return np.float64(z >> _S11) * (1.0 / 9007199254740992.0)


@njit(cache=True, nogil=True)
def _draw_features(key, node, n_features, m_try, perm):
    for r in range(n_features):
        perm[r] = r
    base = np.uint64(node) * np.uint64(m_try)
    for r in range(m_try):
        u = _hash_uniform_scalar(key, base + np.uint64(r))
        j = r + np.int64(u * (n_features - r))
        if j > n_features - 1:
            j = n_features - 1
        tmp = perm[r]
        perm[r] = perm[j]
        perm[j] = tmp
    return np.sort(perm[:m_try])


def prepare_matrix(XT):
    """Dense per-feature ranks and the sorted distinct values they index."""
    XT = np.ascontiguousarray(XT, dtype=np.float64)
    d, n = XT.shape
    ranks = np.empty((d, n), dtype=np.int64)
    svals = np.zeros((d, n))
    for f in range(d):
        u, inv = np.unique(XT[f], return_inverse=True)
        ranks[f] = inv
        svals[f, :u.shape[0]] = u
    return XT, ranks, svals


@njit(cache=True, nogil=True)
def _radix_sort(keys, tmp, n, n_bits):
    # LSD radix sort of non-negative int64 keys[:n], 8 bits per pass.
    count = np.empty(257, dtype=np.int64)
    src = keys
    dst = tmp
    shift = 0
    passes = 0
    while shift < n_bits:
        count[:] = 0
        for i in range(n):
            count[((src[i] >> shift) & 255) + 1] += 1
        for b in range(256):
            count[b + 1] += count[b]
        for i in range(n):
            dg = (src[i] >> shift) & 255
            dst[count[dg]] = src[i]
            count[dg] += 1
        src, dst = dst, src
        shift += 8
        passes += 1
    if passes % 2 == 1:
        for i in range(n):
            keys[i] = src[i]


def grow_tree(prep, y, sample_idx, key, max_depth, min_leaf, m_try):
    XT, ranks, svals = prep
    return _grow_tree(XT, ranks, svals, y, sample_idx, key, max_depth, min_leaf, m_try)


@njit(cache=True, nogil=True)
def _grow_tree(XT, ranks, svals, y, sample_idx, key, max_depth, min_leaf, m_try):
    n = sample_idx.shape[0]
    n_features = XT.shape[0]
    max_nodes = max(2 * n - 1, 1)
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    counts = np.zeros((max_nodes, 2), dtype=np.int64)
    depth = np.zeros(max_nodes, dtype=np.int64)
    lo = np.zeros(max_nodes, dtype=np.int64)
    hi = np.zeros(max_nodes, dtype=np.int64)
    idx = sample_idx.astype(np.int64).copy()
    buf = np.empty(n, dtype=np.int64)
    keys = np.empty(n, dtype=np.int64)
    tmp = np.empty(n, dtype=np.int64)
    perm = np.empty(n_features, dtype=np.int64)
    ukey = np.uint64(key)
    n_bits = 1
    while (np.int64(1) << n_bits) < 2 * XT.shape[1] + 2:
        n_bits += 1

    hi[0] = n
    n_nodes = 1
    k = 0
    while k < n_nodes:
        s = lo[k]
        e = hi[k]
        n_node = e - s
        c1 = 0
        for i in range(s, e):
            c1 += y[idx[i]]
        c0 = n_node - c1
        counts[k, 0] = c0
        counts[k, 1] = c1
        if depth[k] >= max_depth or n_node < 2 * min_leaf or c0 == 0 or c1 == 0:
            k += 1
            continue
        feats = _draw_features(ukey, k, n_features, m_try, perm)
        best = -1.0
        best_f = -1
        best_t = 0.0
        for fi in range(m_try):
            f = feats[fi]
            # key = 2 * rank + label; sorting keys orders samples by value.
            for i in range(n_node):
                r = idx[s + i]
                keys[i] = 2 * ranks[f, r] + y[r]
            _radix_sort(keys, tmp, n_node, n_bits)
            b = 0
            for p in range(n_node - 1):
                b += keys[p] & 1
                nl = p + 1
                nr = n_node - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                r_here = keys[p] >> 1
                r_next = keys[p + 1] >> 1
                if not r_here < r_next:
                    continue
                a = nl - b
                d = c1 - b
                c = nr - d
                af = np.float64(a)
                bf = np.float64(b)
                cf = np.float64(c)
                df = np.float64(d)
                score = (af * af + bf * bf) / np.float64(nl) + (cf * cf + df * df) / np.float64(nr)
                if score > best:
                    best = score
                    best_f = f
                    v_here = svals[f, r_here]
                    v_next = svals[f, r_next]
                    mid = (v_here + v_next) / 2.0
                    if not mid < v_next:
                        mid = v_here
                    best_t = mid
        if best_f < 0:
            k += 1
            continue
        n_l = 0
        for i in range(s, e):
            if XT[best_f, idx[i]] <= best_t:
                buf[n_l] = idx[i]
                n_l += 1
        pos = n_l
        for i in range(s, e):
            if not XT[best_f, idx[i]] <= best_t:
                buf[pos] = idx[i]
                pos += 1
        for i in range(n_node):
            idx[s + i] = buf[i]
        feature[k] = best_f
        threshold[k] = best_t
        left[k] = n_nodes
        right[k] = n_nodes + 1
        lo[n_nodes] = s
        hi[n_nodes] = s + n_l
        lo[n_nodes + 1] = s + n_l
        hi[n_nodes + 1] = e
        depth[n_nodes] = depth[k] + 1
        depth[n_nodes + 1] = depth[k] + 1
        n_nodes += 2
        k += 1
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), counts[:n_nodes].copy())


@njit(cache=True, nogil=True)
def predict_votes(X, feature, threshold, left, right, vote, roots):
    n = X.shape[0]
    total = np.zeros(n, dtype=np.int64)
    for r in range(n):
        for ti in range(roots.shape[0]):
            node = roots[ti]
            while feature[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            total[r] += vote[node]
    return total


def hash_uniform(key, counter):
    out = np.empty(len(counter))
    ukey = np.uint64(key)
    for i, c in enumerate(np.asarray(counter, dtype=np.uint64)):
        out[i] = _hash_uniform_scalar(ukey, c)
    return out
