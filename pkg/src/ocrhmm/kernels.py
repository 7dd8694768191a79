"""Hot inner loops, each in a numba and a numpy flavour.

Public names (``count_components``, ``smallest_k`` ...) are bound to the
numba flavour unless ``OCRHMM_DISABLE_NUMBA`` is set; the ``_nb`` and ``_np``
variants are always importable.  Both flavours return identical results,
including tie handling, which the test-suite checks.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

N_CLASSES = 26
_NEG_INF = -np.inf


# -- connected components ------------------------------------------------------


@njit
def _count_components_nb(stack, connectivity):
    n, rows, cols = stack.shape
    out = np.zeros(n, dtype=np.int64)
    seen = np.zeros((rows, cols), dtype=np.uint8)
    todo = np.empty(rows * cols, dtype=np.int64)
    for k in range(n):
        img = stack[k]
        seen[:, :] = 0
        count = 0
        for r0 in range(rows):
            for c0 in range(cols):
                if img[r0, c0] == 0 or seen[r0, c0]:
                    continue
                count += 1
                seen[r0, c0] = 1
                top = 0
                todo[0] = r0 * cols + c0
                top = 1
                while top > 0:
                    top -= 1
                    r = todo[top] // cols
                    c = todo[top] % cols
                    for dr in range(-1, 2):
                        for dc in range(-1, 2):
                            if dr == 0 and dc == 0:
                                continue
                            if connectivity == 4 and dr != 0 and dc != 0:
                                continue
                            rr = r + dr
                            cc = c + dc
                            if rr < 0 or rr >= rows or cc < 0 or cc >= cols:
                                continue
                            if img[rr, cc] != 0 and not seen[rr, cc]:
                                seen[rr, cc] = 1
                                todo[top] = rr * cols + cc
                                top += 1
        out[k] = count
    return out


def _neighbour_offsets(connectivity):
    if connectivity == 4:
        return [(-1, 0), (1, 0), (0, -1), (0, 1)]
    return [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


def _count_components_np(stack, connectivity):
    # min-label propagation over the whole stack at once
    stack = np.asarray(stack) != 0
    n, rows, cols = stack.shape
    big = rows * cols + 1
    own = np.broadcast_to(np.arange(1, rows * cols + 1).reshape(rows, cols), stack.shape)
    labels = np.where(stack, own, big)
    offsets = _neighbour_offsets(connectivity)
    while True:
        padded = np.pad(labels, ((0, 0), (1, 1), (1, 1)), constant_values=big)
        best = labels
        for dr, dc in offsets:
            best = np.minimum(best, padded[:, 1 + dr : 1 + dr + rows, 1 + dc : 1 + dc + cols])
        best = np.where(stack, best, big)
        if np.array_equal(best, labels):
            break
        labels = best
    return np.sum(stack & (labels == own), axis=(1, 2)).astype(np.int64)


# -- nearest neighbours ----------------------------------------------------------


@njit
def _smallest_k_nb(d2, k):
    nq, nt = d2.shape
    out = np.empty((nq, k), dtype=np.int64)
    bd = np.empty(k, dtype=np.float64)
    bi = np.empty(k, dtype=np.int64)
    for q in range(nq):
        filled = 0
        for j in range(nt):
            d = d2[q, j]
            if filled == k and not d < bd[k - 1]:
                continue
            # first slot holding a strictly larger distance keeps equal
            # distances in index order
            p = filled if filled < k else k - 1
            while p > 0 and bd[p - 1] > d:
                p -= 1
            last = filled if filled < k else k - 1
            for s in range(last, p, -1):
                bd[s] = bd[s - 1]
                bi[s] = bi[s - 1]
            bd[p] = d
            bi[p] = j
            if filled < k:
                filled += 1
        for s in range(k):
            out[q, s] = bi[s]
    return out


def _smallest_k_np(d2, k):
    d2 = np.asarray(d2, dtype=np.float64)
    nq, nt = d2.shape
    if nq == 0:
        return np.empty((0, k), dtype=np.int64)
    thr = np.partition(d2, k - 1, axis=1)[:, k - 1 : k]
    below = d2 < thr
    need = k - below.sum(axis=1, keepdims=True)
    at = d2 == thr
    take = below | (at & (np.cumsum(at, axis=1) <= need))
    idx = np.nonzero(take)[1].reshape(nq, k)
    order = np.argsort(np.take_along_axis(d2, idx, axis=1), axis=1, kind="stable")
    return np.take_along_axis(idx, order, axis=1)


@njit
def _sqdist_direct_nb(a, b):
    na, d = a.shape
    nb_ = b.shape[0]
    out = np.empty((na, nb_), dtype=np.float64)
    for i in range(na):
        for j in range(nb_):
            s = 0.0
            for f in range(d):
                t = a[i, f] - b[j, f]
                s += t * t
            out[i, j] = s
    return out


def _sqdist_direct_np(a, b):
    out = np.zeros((a.shape[0], b.shape[0]))
    for f in range(a.shape[1]):
        diff = a[:, f, None] - b[None, :, f]
        out += diff * diff
    return out


def sqdist_expand(a, b, b_norms=None):
    """Squared distances through one matrix product; exact for integer data."""
    if b_norms is None:
        b_norms = np.einsum("ij,ij->i", b, b)
    out = a @ b.T
    out *= -2.0
    out += np.einsum("ij,ij->i", a, a)[:, None]
    out += b_norms[None, :]
    np.maximum(out, 0.0, out=out)
    return out


# -- Parzen class sums -------------------------------------------------------------


@njit
def _class_logsumexp_nb(d2, labels, scale, exclude_offset, n_classes):
    nq, nt = d2.shape
    out = np.full((nq, n_classes), -np.inf)
    sums = np.zeros(n_classes)
    for q in range(nq):
        skip = exclude_offset + q if exclude_offset >= 0 else -1
        m = np.inf
        for j in range(nt):
            if j != skip and d2[q, j] < m:
                m = d2[q, j]
        if m == np.inf:
            continue
        sums[:] = 0.0
        for j in range(nt):
            if j != skip:
                sums[labels[j]] += math.exp(-(d2[q, j] - m) * scale)
        for c in range(n_classes):
            if sums[c] > 0.0:
                out[q, c] = math.log(sums[c]) - m * scale
    return out


def _class_logsumexp_np(d2, labels, scale, exclude_offset, n_classes):
    d2 = np.array(d2, dtype=np.float64)
    nq, nt = d2.shape
    if exclude_offset >= 0:
        rows = np.arange(nq)
        d2[rows, exclude_offset + rows] = np.inf
    m = d2.min(axis=1, keepdims=True)
    onehot = np.zeros((nt, n_classes))
    onehot[np.arange(nt), labels] = 1.0
    with np.errstate(invalid="ignore"):
        w = np.exp(-(d2 - m) * scale)
    w[~np.isfinite(m[:, 0])] = 0.0
    sums = w @ onehot
    with np.errstate(divide="ignore"):
        out = np.log(sums) - m * scale
    out[sums == 0] = -np.inf
    return out


@njit
def _box_counts_nb(query, train, labels, half, exclude_offset, n_classes):
    nq, d = query.shape
    nt = train.shape[0]
    out = np.zeros((nq, n_classes), dtype=np.int64)
    for q in range(nq):
        skip = exclude_offset + q if exclude_offset >= 0 else -1
        for j in range(nt):
            if j == skip:
                continue
            inside = True
            for f in range(d):
                if abs(query[q, f] - train[j, f]) > half:
                    inside = False
                    break
            if inside:
                out[q, labels[j]] += 1
    return out


def _box_counts_np(query, train, labels, half, exclude_offset, n_classes):
    nq = query.shape[0]
    worst = np.zeros((nq, train.shape[0]))
    for f in range(query.shape[1]):
        np.maximum(worst, np.abs(query[:, f, None] - train[None, :, f]), out=worst)
    inside = worst <= half
    if exclude_offset >= 0:
        rows = np.arange(nq)
        inside[rows, exclude_offset + rows] = False
    onehot = np.zeros((train.shape[0], n_classes), dtype=np.int64)
    onehot[np.arange(train.shape[0]), labels] = 1
    return inside.astype(np.int64) @ onehot


# -- 1-D Gaussian KDE -------------------------------------------------------------


@njit
def _kde_logpdf_nb(x, centers, log_weights, h):
    m = x.shape[0]
    u = centers.shape[0]
    out = np.empty(m)
    norm = math.log(h) + 0.5 * math.log(2.0 * math.pi)
    terms = np.empty(u)
    for i in range(m):
        top = -np.inf
        for j in range(u):
            z = (x[i] - centers[j]) / h
            t = log_weights[j] - 0.5 * z * z
            terms[j] = t
            if t > top:
                top = t
        s = 0.0
        for j in range(u):
            s += math.exp(terms[j] - top)
        out[i] = top + math.log(s) - norm
    return out


def _kde_logpdf_np(x, centers, log_weights, h):
    z = (np.asarray(x, dtype=np.float64)[:, None] - centers[None, :]) / h
    t = log_weights[None, :] - 0.5 * z * z
    top = t.max(axis=1, keepdims=True)
    s = np.exp(t - top).sum(axis=1)
    return top[:, 0] + np.log(s) - (math.log(h) + 0.5 * math.log(2.0 * math.pi))


# -- Viterbi --------------------------------------------------------------------------


@njit
def _viterbi_nb(log_initial, log_trans, log_last_trans, log_emit, log_end):
    length, n = log_emit.shape
    back = np.zeros((length, n), dtype=np.int64)
    delta = np.empty(n)
    new = np.empty(n)
    for j in range(n):
        delta[j] = log_initial[j] + log_emit[0, j]
    for t in range(1, length):
        trans = log_last_trans if t == length - 1 else log_trans
        for j in range(n):
            best = -np.inf
            arg = 0
            for i in range(n):
                v = delta[i] + trans[i, j]
                if v > best:
                    best = v
                    arg = i
            new[j] = best + log_emit[t, j]
            back[t, j] = arg
        delta[:] = new
    best = -np.inf
    arg = 0
    for j in range(n):
        v = delta[j] + log_end[j]
        if v > best:
            best = v
            arg = j
    path = np.empty(length, dtype=np.int64)
    path[length - 1] = arg
    for t in range(length - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, best


def _viterbi_np(log_initial, log_trans, log_last_trans, log_emit, log_end):
    length, n = log_emit.shape
    back = np.zeros((length, n), dtype=np.int64)
    delta = log_initial + log_emit[0]
    for t in range(1, length):
        trans = log_last_trans if t == length - 1 else log_trans
        cand = delta[:, None] + trans
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(n)] + log_emit[t]
    final = delta + log_end
    arg = int(np.argmax(final))
    best = final[arg]
    path = np.empty(length, dtype=np.int64)
    path[-1] = arg
    for t in range(length - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, float(best)


if USE_NUMBA:
    count_components = _count_components_nb
    smallest_k = _smallest_k_nb
    sqdist_direct = _sqdist_direct_nb
    class_logsumexp = _class_logsumexp_nb
    box_counts = _box_counts_nb
    kde_logpdf = _kde_logpdf_nb
    viterbi = _viterbi_nb
else:
    count_components = _count_components_np
    smallest_k = _smallest_k_np
    sqdist_direct = _sqdist_direct_np
    class_logsumexp = _class_logsumexp_np
    box_counts = _box_counts_np
    kde_logpdf = _kde_logpdf_np
    viterbi = _viterbi_np
