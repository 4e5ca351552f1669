"""Rank-based evaluation: P@k and NDCG@k with binary relevance."""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

DEFAULT_KS = (1, 3, 5)


def ranking(scores):
    """Label ids by descending score, lower id first on ties."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def _check_k(k, n_labels):
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n_labels:
        raise ValueError(f"k={k} exceeds the number of labels K={n_labels}")


def precision_at_k(scores, truth, k):
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth)
    _check_k(k, scores.size)
    top = ranking(scores)[:k]
    return float(np.sum(truth[top] != 0)) / k


def dcg_at_k(scores, truth, k):
    top = ranking(scores)[:k]
    rel = (np.asarray(truth)[top] != 0).astype(np.float64)
    return float(np.sum(rel / np.log2(np.arange(2, top.size + 2))))


def ndcg_at_k(scores, truth, k):
    """NDCG@k. Returns ``nan`` for a document without relevant labels."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth)
    _check_k(k, scores.size)
    n_rel = int(np.count_nonzero(truth))
    if n_rel == 0:
        return math.nan
    ideal = float(np.sum(1.0 / np.log2(np.arange(2, min(k, n_rel) + 2))))
    return dcg_at_k(scores, truth, k) / ideal


@dataclass
class MetricsReport:
    p_at: dict
    ndcg_at: dict
    n_docs: int
    n_skipped: int = 0
    per_subset: dict = field(default_factory=dict)

    def to_dict(self):
        out = {f"P@{k}": v for k, v in self.p_at.items()}
        # NDCG@1 equals P@1 under binary relevance, so it is not repeated
        out.update({f"NDCG@{k}": v for k, v in self.ndcg_at.items() if k > 1})
        out["n_docs"] = self.n_docs
        if self.n_skipped:
            out["n_skipped"] = self.n_skipped
        for name, rep in self.per_subset.items():
            out[name] = rep.to_dict()
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def csv_row(self, ks=None):
        ks = ks or list(self.p_at)
        vals = [self.p_at[k] for k in ks] + [self.ndcg_at[k] for k in ks if k > 1]
        return ",".join(f"{v:.6f}" for v in vals)

    @staticmethod
    def csv_header(ks=DEFAULT_KS):
        return ",".join([f"P@{k}" for k in ks] + [f"NDCG@{k}" for k in ks if k > 1])


def evaluate(scores, truth, ks=DEFAULT_KS):
    """Mean P@k / NDCG@k over documents.

    ``scores`` and ``truth`` are ``(n_docs, K)`` arrays. Documents without any
    relevant label are left out of both means and reported in ``n_skipped``.
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    truth = np.ascontiguousarray(truth, dtype=np.uint8)
    if scores.ndim != 2 or scores.shape != truth.shape:
        raise ValueError("scores and truth must be matching 2-D arrays")
    if scores.shape[0] == 0:
        raise ValueError("cannot evaluate an empty dataset")
    ks_arr = np.asarray(sorted(set(int(k) for k in ks)), dtype=np.int64)
    for k in ks_arr:
        _check_k(k, scores.shape[1])
    prec, ndcg, n_rel = kernels.ranking_metrics(scores, truth, ks_arr)
    keep = n_rel > 0
    n_docs = int(keep.sum())
    if n_docs == 0:
        raise ValueError("no document has a relevant label")
    # math.fsum: order-independent mean
    p_at = {int(k): math.fsum(prec[keep, c]) / n_docs for c, k in enumerate(ks_arr)}
    ndcg_at = {int(k): math.fsum(ndcg[keep, c]) / n_docs for c, k in enumerate(ks_arr)}
    return MetricsReport(p_at, ndcg_at, n_docs, int((~keep).sum()))
