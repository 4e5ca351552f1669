"""Hot inner loops: co-occurrence counting, batched reranking, ranking metrics.

Each kernel exists twice: a loop version compiled with numba (``*_jit``) and a
vectorised numpy version (``*_np``). The unsuffixed names dispatch to one of
them according to :mod:`corank._backend`. Both versions must return identical
results; the test suite checks this on random inputs.

Label sets are passed in CSR form (``indptr``, ``indices``), one row per
document, with no duplicate ids inside a row.
"""
import numpy as np

from ._backend import USE_NUMBA, njit

# rerank modes
MODE_FULL = 0
MODE_NO_COOCCUR = 1
MODE_NO_FREQ_RANK = 2


# ---------------------------------------------------------------------------
# top-m selection shared by the loop kernels
# ---------------------------------------------------------------------------

def _select_top_py(values, allowed, m, out):
    """Write into ``out`` the ids of the ``m`` largest allowed values, best first.

    Ties go to the lower id. Returns how many ids were written (fewer than
    ``m`` when not enough ids are allowed). Runs in O(K * m), which beats a
    full sort when ``m`` is small next to K.
    """
    vals = np.empty(max(m, 1))
    c = 0
    for j in range(values.shape[0]):
        if not allowed[j]:
            continue
        v = values[j]
        if c == m:
            if m == 0 or not v > vals[c - 1]:
                continue
            c -= 1
        p = c
        while p > 0 and vals[p - 1] < v:
            vals[p] = vals[p - 1]
            out[p] = out[p - 1]
            p -= 1
        vals[p] = v
        out[p] = j
        c += 1
    return c


_select_top = njit(_select_top_py)


# ---------------------------------------------------------------------------
# co-occurrence counts
# ---------------------------------------------------------------------------

def _cooccurrence_counts_py(indptr, indices, n_labels):
    counts = np.zeros((n_labels, n_labels), dtype=np.int64)
    for d in range(indptr.shape[0] - 1):
        lo = indptr[d]
        hi = indptr[d + 1]
        for a in range(lo, hi):
            i = indices[a]
            for b in range(lo, hi):
                counts[i, indices[b]] += 1
    return counts


def cooccurrence_counts_np(indptr, indices, n_labels):
    n_docs = indptr.shape[0] - 1
    indicator = np.zeros((n_docs, n_labels), dtype=np.float64)
    rows = np.repeat(np.arange(n_docs), np.diff(indptr))
    indicator[rows, indices] = 1.0
    # float matmul goes through BLAS; counts stay exact far beyond any corpus size
    return np.rint(indicator.T @ indicator).astype(np.int64)


cooccurrence_counts_jit = njit(_cooccurrence_counts_py)


# ---------------------------------------------------------------------------
# batched rerank: S1 -> S2 -> S3 -> S4 -> S for every row
# ---------------------------------------------------------------------------

def _rerank_rows_py(scores, counts, freq_order, freq_rank, alpha, gamma, mode):
    n_rows, n_labels = scores.shape
    labels = np.empty((n_rows, gamma), dtype=np.int64)
    is_seed = np.zeros((n_rows, gamma), dtype=np.bool_)
    seq = np.empty(gamma, dtype=np.int64)
    seq_seed = np.zeros(gamma, dtype=np.bool_)
    pick = np.empty(gamma, dtype=np.int64)
    allowed = np.empty(n_labels, dtype=np.bool_)
    used = np.empty(n_labels, dtype=np.bool_)
    summed = np.empty(n_labels, dtype=np.float64)
    for r in range(n_rows):
        s = scores[r]
        for j in range(n_labels):
            allowed[j] = s[j] > alpha
        n = _select_top(s, allowed, gamma, seq)
        if n == 0:
            # nothing clears the threshold: fall back to the arg-max
            allowed[:] = True
            n = _select_top(s, allowed, 1, seq)
        for p in range(gamma):
            seq_seed[p] = p < n
        used[:] = False
        for p in range(n):
            used[seq[p]] = True

        if mode == MODE_NO_COOCCUR:
            for j in range(n_labels):
                allowed[j] = not used[j]
            c = _select_top(s, allowed, gamma - n, pick)
        else:
            summed[:] = 0.0
            for v in range(n):
                row = counts[seq[v]]
                for j in range(n_labels):
                    summed[j] += row[j]
            for j in range(n_labels):
                allowed[j] = summed[j] > 0.0 and not used[j]
            c = _select_top(summed, allowed, gamma - n, pick)
        for p in range(c):
            seq[n + p] = pick[p]
            used[pick[p]] = True
        n += c
        # pad by training frequency when the expansion ran short
        for idx in freq_order:
            if n == gamma:
                break
            if not used[idx]:
                seq[n] = idx
                used[idx] = True
                n += 1

        if mode == MODE_NO_FREQ_RANK:
            for p in range(gamma):
                labels[r, p] = seq[p]
                is_seed[r, p] = seq_seed[p]
        else:
            keys = np.empty(gamma, dtype=np.int64)
            for p in range(gamma):
                keys[p] = freq_rank[seq[p]]
            perm = np.argsort(keys, kind="mergesort")
            for p in range(gamma):
                labels[r, p] = seq[perm[p]]
                is_seed[r, p] = seq_seed[perm[p]]
    return labels, is_seed


rerank_rows_jit = njit(_rerank_rows_py)


def rerank_rows_np(scores, counts, freq_order, freq_rank, alpha, gamma, mode):
    n_rows, n_labels = scores.shape
    labels = np.empty((n_rows, gamma), dtype=np.int64)
    is_seed = np.zeros((n_rows, gamma), dtype=np.bool_)
    orders = np.argsort(-scores, axis=1, kind="stable")
    for r in range(n_rows):
        order = orders[r]
        above = order[scores[r, order] > alpha][:gamma]
        seeds = above if above.size else order[:1]
        used = np.zeros(n_labels, dtype=bool)
        used[seeds] = True
        need = gamma - seeds.size
        if mode == MODE_NO_COOCCUR:
            extra = order[~used[order]][:need]
        else:
            summed = counts[seeds].sum(axis=0)
            cand = np.argsort(-summed, kind="stable")
            cand = cand[(summed[cand] > 0) & ~used[cand]][:need]
            used[cand] = True
            pad = freq_order[~used[freq_order]][: need - cand.size]
            extra = np.concatenate([cand, pad])
        seq = np.concatenate([seeds, extra]).astype(np.int64)
        flags = np.zeros(gamma, dtype=bool)
        flags[: seeds.size] = True
        if mode != MODE_NO_FREQ_RANK:
            perm = np.argsort(freq_rank[seq], kind="stable")
            seq, flags = seq[perm], flags[perm]
        labels[r] = seq
        is_seed[r] = flags
    return labels, is_seed


# ---------------------------------------------------------------------------
# P@k and NDCG@k per row
# ---------------------------------------------------------------------------

def _ranking_metrics_py(scores, truth, ks):
    n_rows, n_labels = scores.shape
    n_k = ks.shape[0]
    kmax = 0
    for k in ks:
        kmax = max(kmax, k)
    prec = np.zeros((n_rows, n_k))
    ndcg = np.zeros((n_rows, n_k))
    n_rel = np.zeros(n_rows, dtype=np.int64)
    disc = np.empty(kmax)
    for i in range(kmax):
        disc[i] = 1.0 / np.log2(i + 2.0)
    ideal = np.empty(kmax)
    acc = 0.0
    for i in range(kmax):
        acc += disc[i]
        ideal[i] = acc
    hits = np.empty(kmax)
    gains = np.empty(kmax)
    order = np.empty(kmax, dtype=np.int64)
    allowed = np.ones(n_labels, dtype=np.bool_)
    for r in range(n_rows):
        rel = 0
        for j in range(n_labels):
            if truth[r, j]:
                rel += 1
        n_rel[r] = rel
        _select_top(scores[r], allowed, kmax, order)
        h = 0.0
        g = 0.0
        for i in range(kmax):
            if truth[r, order[i]]:
                h += 1.0
                g += disc[i]
            hits[i] = h
            gains[i] = g
        for c in range(n_k):
            k = ks[c]
            prec[r, c] = hits[k - 1] / k
            if rel > 0:
                ndcg[r, c] = gains[k - 1] / ideal[min(k, rel) - 1]
    return prec, ndcg, n_rel


ranking_metrics_jit = njit(_ranking_metrics_py)


def ranking_metrics_np(scores, truth, ks):
    kmax = int(ks.max())
    disc = 1.0 / np.log2(np.arange(kmax) + 2.0)
    ideal = np.cumsum(disc)
    order = np.argsort(-scores, axis=1, kind="stable")[:, :kmax]
    top = np.take_along_axis(truth, order, axis=1).astype(np.float64)
    hits = np.cumsum(top, axis=1)
    gains = np.cumsum(top * disc, axis=1)
    n_rel = truth.astype(np.int64).sum(axis=1)
    prec = hits[:, ks - 1] / ks
    norm = ideal[np.clip(np.minimum(ks[None, :], n_rel[:, None]) - 1, 0, None)]
    ndcg = np.where(n_rel[:, None] > 0, gains[:, ks - 1] / norm, 0.0)
    return prec, ndcg, n_rel


if USE_NUMBA:
    cooccurrence_counts = cooccurrence_counts_jit
    rerank_rows = rerank_rows_jit
    ranking_metrics = ranking_metrics_jit
else:
    cooccurrence_counts = cooccurrence_counts_np
    rerank_rows = rerank_rows_np
    ranking_metrics = ranking_metrics_np
