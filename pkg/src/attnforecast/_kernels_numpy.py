"""Pure-numpy implementations of the hot kernels.

Each function has a twin with the same signature in ``_kernels_numba``.
The forest kernels must produce bit-identical trees in both backends, so
split scores, tie-breaks and the per-node feature draw follow exactly the
same arithmetic.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def window_stats(t, values, lo, hi, t0):
    """Mean/min/max/std/slope of ``values[lo[w]:hi[w]]`` for every window.

    Returns an array of shape (n_windows, n_channels, 5). Empty windows are
    left at zero; callers track presence separately.
    """
    n_win = lo.shape[0]
    n_ch = values.shape[1]
    out = np.zeros((n_win, n_ch, 5))
    for w in range(n_win):
        a, b = lo[w], hi[w]
        if b <= a:
            continue
        v = values[a:b]
        vmin = v.min(axis=0)
        vmax = v.max(axis=0)
        mean = np.clip(v.sum(axis=0) / (b - a), vmin, vmax)
        dv = v - mean
        std = np.sqrt((dv * dv).sum(axis=0) / (b - a))
        tt = t[a:b] - t0[w]
        tc = tt - tt.sum() / (b - a)
        denom = (tc * tc).sum()
        if denom > 0.0:
            slope = (tc[:, None] * dv).sum(axis=0) / denom
        else:
            slope = np.zeros(n_ch)
        out[w, :, 0] = mean
        out[w, :, 1] = vmin
        out[w, :, 2] = vmax
        out[w, :, 3] = std
        out[w, :, 4] = slope
    return out


def idt_fixations(t, x, y, valid, max_dispersion, min_duration, max_gap):
    """Dispersion-threshold fixation detection.

    Returns (start_index, end_index) arrays of first/last member samples.
    """
    n = t.shape[0]
    starts = []
    ends = []
    i = 0
    while i < n:
        if not valid[i]:
            i += 1
            continue
        xmin = xmax = x[i]
        ymin = ymax = y[i]
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
            xmin, xmax, ymin, ymax = nxmin, nxmax, nymin, nymax
            j = k
            gap_from = -1
            k += 1
        if t[j] - t[i] >= min_duration:
            starts.append(i)
            ends.append(j)
            i = j + 1
        else:
            i += 1
    return np.asarray(starts, dtype=np.int64), np.asarray(ends, dtype=np.int64)


def hash_uniform(key, counter):
    """Stateless uniform in [0, 1) from (key, counter) via splitmix64."""
    z = np.asarray(counter, dtype=np.uint64) + np.uint64(key) + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _draw_features(key, node, n_features, m_try):
    u = hash_uniform(key, np.arange(node * m_try, (node + 1) * m_try, dtype=np.uint64))
    perm = np.arange(n_features)
    for r in range(m_try):
        j = r + int(u[r] * (n_features - r))
        if j > n_features - 1:
            j = n_features - 1
        perm[r], perm[j] = perm[j], perm[r]
    return np.sort(perm[:m_try])


def prepare_matrix(XT):
    return (np.ascontiguousarray(XT, dtype=np.float64),)


def grow_tree(prep, y, sample_idx, key, max_depth, min_leaf, m_try):
    """Grow one CART tree (Gini) on the columns ``sample_idx`` of ``XT``.

    ``prep`` comes from ``prepare_matrix(XT)`` where ``XT`` is the
    feature-major (n_features, n_rows) training matrix.

    Nodes are numbered in creation order (breadth-first); node ``k`` draws
    its candidate features from ``hash_uniform(key, k * m_try + r)``.
    Returns (feature, threshold, left, right, counts) trimmed to node count.
    """
    (XT,) = prep
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

    hi[0] = n
    n_nodes = 1
    k = 0
    while k < n_nodes:
        rows = idx[lo[k]:hi[k]]
        yk = y[rows]
        c1 = int(yk.sum())
        c0 = rows.shape[0] - c1
        counts[k, 0] = c0
        counts[k, 1] = c1
        n_node = rows.shape[0]
        if depth[k] >= max_depth or n_node < 2 * min_leaf or c0 == 0 or c1 == 0:
            k += 1
            continue
        feats = _draw_features(key, k, n_features, m_try)
        best = -1.0
        best_f = -1
        best_t = 0.0
        n_left = np.arange(1, n_node, dtype=np.int64)
        n_right = n_node - n_left
        fl = n_left.astype(np.float64)
        fr = n_right.astype(np.float64)
        ok_size = (n_left >= min_leaf) & (n_right >= min_leaf)
        for f in feats:
            vals = XT[f, rows]
            order = np.argsort(vals, kind="stable")
            sv = vals[order]
            b = np.cumsum(yk[order])[:-1]
            a = n_left - b
            d = c1 - b
            c = n_right - d
            af = a.astype(np.float64)
            bf = b.astype(np.float64)
            cf = c.astype(np.float64)
            df = d.astype(np.float64)
            score = (af * af + bf * bf) / fl + (cf * cf + df * df) / fr
            ok = ok_size & (sv[:-1] < sv[1:])
            if not ok.any():
                continue
            score = np.where(ok, score, -1.0)
            p = int(np.argmax(score))
            if score[p] > best:
                best = score[p]
                best_f = int(f)
                mid = (sv[p] + sv[p + 1]) / 2.0
                if not mid < sv[p + 1]:
                    mid = sv[p]
                best_t = mid
        if best_f < 0:
            k += 1
            continue
        go_left = XT[best_f, rows] <= best_t
        seg = np.concatenate([rows[go_left], rows[~go_left]])
        idx[lo[k]:hi[k]] = seg
        mid_pos = lo[k] + int(go_left.sum())
        feature[k] = best_f
        threshold[k] = best_t
        left[k] = n_nodes
        right[k] = n_nodes + 1
        for child, (s, e) in ((n_nodes, (lo[k], mid_pos)), (n_nodes + 1, (mid_pos, hi[k]))):
            lo[child] = s
            hi[child] = e
            depth[child] = depth[k] + 1
        n_nodes += 2
        k += 1
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes],
            right[:n_nodes], counts[:n_nodes])


def predict_votes(X, feature, threshold, left, right, vote, roots):
    """Number of trees voting for class 1, per row.

    Trees are concatenated; ``roots[i]`` is the global id of tree ``i``'s
    root and child pointers are global ids.
    """
    n = X.shape[0]
    total = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        while True:
            f = feature[node]
            inner = f >= 0
            if not inner.any():
                break
            r = rows[inner]
            nd = node[inner]
            go_left = X[r, f[inner]] <= threshold[nd]
            node[inner] = np.where(go_left, left[nd], right[nd])
        total += vote[node]
    return total
