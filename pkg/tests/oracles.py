"""Brute-force reference implementations, written without touching corank internals."""
import math


def cooccurrence_oracle(label_sets, K):
    """O(N * K^2): test every label pair against every document."""
    m = [[0] * K for _ in range(K)]
    for labels in label_sets:
        for i in range(K):
            for j in range(K):
                if i in labels and j in labels:
                    m[i][j] += 1
    return m


def _rank(values):
    # descending value, lower index first on ties
    return sorted(range(len(values)), key=lambda i: (-values[i], i))


def rerank_oracle(s1, M, freq, alpha, gamma, ablation="none"):
    """Step-by-step rerank: returns (labels, provenance) lists."""
    K = len(s1)
    order = _rank(list(s1))
    seeds = [i for i in order if s1[i] > alpha]
    seeds = seeds[:gamma]
    if not seeds:
        seeds = [order[0]]
    need = gamma - len(seeds)
    if ablation == "no_cooccur":
        extra = [i for i in order if i not in seeds][:need]
    else:
        summed = [0] * K
        for lab in seeds:
            for j in range(K):
                summed[j] += M[lab][j]
        extra = [j for j in _rank(summed) if j not in seeds and summed[j] > 0][:need]
        for j in _rank(list(freq)):
            if len(extra) >= need:
                break
            if j not in seeds and j not in extra:
                extra.append(j)
    seq = [(lab, "seed") for lab in seeds] + [(lab, "expanded") for lab in extra]
    if ablation != "no_freq_rank":
        seq.sort(key=lambda p: (-freq[p[0]], p[0]))
    return [p[0] for p in seq], [p[1] for p in seq]


def precision_oracle(scores, truth, k):
    top = _rank(list(scores))[:k]
    return sum(1 for i in top if truth[i]) / k


def ndcg_oracle(scores, truth, k):
    top = _rank(list(scores))[:k]
    dcg = 0.0
    for pos, i in enumerate(top, start=1):
        if truth[i]:
            dcg += 1.0 / math.log2(pos + 1)
    n_rel = sum(1 for t in truth if t)
    idcg = 0.0
    for pos in range(1, min(k, n_rel) + 1):
        idcg += 1.0 / math.log2(pos + 1)
    return dcg / idcg


def adam_oracle(p, g, m, v, t, lr, b1, b2, eps, wd):
    """Scalar AdamW step written out longhand; returns (p, m, v)."""
    p = p - lr * wd * p
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mhat = m / (1 - b1 ** t)
    vhat = v / (1 - b2 ** t)
    return p - lr * mhat / (math.sqrt(vhat) + eps), m, v
