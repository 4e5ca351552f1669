"""Two-stage label reranking from initial scores and label co-occurrence.

Pipeline for one document::

    scores --threshold--> seeds --co-occurrence row sum--> expanded
           seeds + expanded --sort by training frequency--> final sequence

All ties are broken towards the lower label id.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels

SEED = "seed"
EXPANDED = "expanded"

ABLATION_MODES = {
    "none": kernels.MODE_FULL,
    "no_cooccur": kernels.MODE_NO_COOCCUR,
    "no_freq_rank": kernels.MODE_NO_FREQ_RANK,
    # no_position only changes the fusion step; the label sequence is unchanged
    "no_position": kernels.MODE_FULL,
}


@dataclass(frozen=True)
class RerankedSequence:
    labels: tuple
    provenance: tuple
    gamma: int

    def __len__(self):
        return len(self.labels)


def _counts(matrix):
    return matrix.counts if hasattr(matrix, "counts") else np.asarray(matrix)


def _check_gamma(gamma, n_labels):
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    if gamma > n_labels:
        raise ValueError(f"gamma={gamma} exceeds the number of labels K={n_labels}")


def select_seed_labels(scores, alpha, gamma):
    """Labels scoring strictly above ``alpha``, best first, at most ``gamma`` of them.

    Falls back to the single best label when nothing clears the threshold.
    """
    scores = np.asarray(scores, dtype=np.float64)
    order = sorted(range(scores.size), key=lambda i: (-scores[i], i))
    seeds = [i for i in order if scores[i] > alpha][:gamma]
    return seeds or [order[0]]


def expand_labels(seeds, matrix, gamma, freq):
    """Pick ``gamma - len(seeds)`` extra labels by summed co-occurrence with the seeds.

    Only labels with positive summed count qualify; any shortfall is padded
    with the most frequent unused labels.
    """
    counts = _counts(matrix)
    freq = np.asarray(freq)
    need = gamma - len(seeds)
    if need <= 0:
        return []
    summed = counts[list(seeds)].sum(axis=0)
    taken = set(seeds)
    by_cooc = sorted((j for j in range(summed.size) if j not in taken and summed[j] > 0),
                     key=lambda j: (-summed[j], j))
    out = by_cooc[:need]
    if len(out) < need:
        taken.update(out)
        pad = sorted((j for j in range(freq.size) if j not in taken), key=lambda j: (-freq[j], j))
        out.extend(pad[: need - len(out)])
    return out


def summed_cooccurrence(seeds, matrix):
    return _counts(matrix)[list(seeds)].sum(axis=0)


def frequency_rank(labels, freq, provenance=None, gamma=None):
    """Sort labels by descending training frequency, carrying provenance along."""
    freq = np.asarray(freq)
    labels = list(labels)
    if provenance is None:
        provenance = [SEED] * len(labels)
    pairs = sorted(zip(labels, provenance), key=lambda p: (-freq[p[0]], p[0]))
    return RerankedSequence(
        tuple(int(p[0]) for p in pairs),
        tuple(p[1] for p in pairs),
        len(labels) if gamma is None else gamma,
    )


def rerank_pipeline(scores, matrix, freq, alpha, gamma, ablation="none"):
    """Seeds, expansion, union and frequency ordering for a single document."""
    scores = np.asarray(scores, dtype=np.float64)
    _check_gamma(gamma, scores.size)
    if ablation not in ABLATION_MODES:
        raise ValueError(f"unknown ablation {ablation!r}")
    seeds = select_seed_labels(scores, alpha, gamma)
    if ablation == "no_cooccur":
        order = sorted(range(scores.size), key=lambda i: (-scores[i], i))
        extra = [i for i in order if i not in seeds][: gamma - len(seeds)]
    else:
        extra = expand_labels(seeds, matrix, gamma, freq)
    labels = [int(i) for i in seeds] + [int(i) for i in extra]
    prov = [SEED] * len(seeds) + [EXPANDED] * len(extra)
    if ablation == "no_freq_rank":
        return RerankedSequence(tuple(labels), tuple(prov), gamma)
    return frequency_rank(labels, freq, prov, gamma)


def frequency_order(freq):
    """Label ids by descending frequency and each label's position in that order."""
    freq = np.asarray(freq)
    order = np.argsort(-freq, kind="stable").astype(np.int64)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size, dtype=np.int64)
    return order, rank


def rerank_batch(scores, matrix, freq, alpha, gamma, ablation="none"):
    """Vectorised rerank over the rows of ``scores``.

    Returns ``(labels, is_seed)``, both ``(n_rows, gamma)`` arrays.
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    _check_gamma(gamma, scores.shape[1])
    mode = ABLATION_MODES[ablation]
    order, rank = frequency_order(freq)
    counts = np.ascontiguousarray(_counts(matrix), dtype=np.int64)
    return kernels.rerank_rows(scores, counts, order, rank, float(alpha), int(gamma), mode)
