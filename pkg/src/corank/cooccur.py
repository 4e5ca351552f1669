"""Document-level label co-occurrence counts and their on-disk format.

File format (plain text)::

    COOC v1 <K> <nnz>
    <i> <j> <count>        # nnz lines, i <= j, count > 0

Only the upper triangle is stored; the lower one is rebuilt on load.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels

MAGIC = "COOC"
VERSION = "v1"


class CooccurrenceFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CooccurrenceMatrix:
    counts: np.ndarray  # K x K int64, symmetric

    @property
    def K(self):
        return self.counts.shape[0]

    def row(self, i):
        """Co-occurrence profile of label ``i`` as a dense length-K vector."""
        if not 0 <= i < self.K:
            raise IndexError(f"label id {i} out of range for K={self.K}")
        return self.counts[i].copy()

    def diagonal(self):
        return np.diag(self.counts).copy()

    def __eq__(self, other):
        if not isinstance(other, CooccurrenceMatrix):
            return NotImplemented
        return self.counts.shape == other.counts.shape and bool(np.array_equal(self.counts, other.counts))


def build_cooccurrence(train, K=None):
    """Count, for every label pair, the training documents carrying both labels."""
    if K is None:
        K = train.n_labels
    indptr, indices = train.label_csr()
    if indices.size and indices.max() >= K:
        raise ValueError(f"label id {indices.max()} >= K={K}")
    counts = kernels.cooccurrence_counts(indptr, indices, K)
    counts.setflags(write=False)
    return CooccurrenceMatrix(counts)


def row(matrix, i):
    return matrix.row(i)


def format_matrix(matrix):
    """Text form: header line, then one ``i j count`` line per non-zero entry with i <= j."""
    iu, ju = np.nonzero(np.triu(matrix.counts))
    lines = [f"{MAGIC} {VERSION} {matrix.K} {iu.size}"]
    lines += [f"{i} {j} {matrix.counts[i, j]}" for i, j in zip(iu, ju)]
    return "\n".join(lines) + "\n"


def save_matrix(matrix, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_matrix(matrix))


def load_matrix(path):
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CooccurrenceFormatError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != MAGIC or head[1] != VERSION:
        raise CooccurrenceFormatError(f"{path}: bad header {lines[0]!r}")
    try:
        K, nnz = int(head[2]), int(head[3])
    except ValueError:
        raise CooccurrenceFormatError(f"{path}: bad header {lines[0]!r}") from None
    if K < 0 or nnz < 0:
        raise CooccurrenceFormatError(f"{path}: negative size in header")
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != nnz:
        raise CooccurrenceFormatError(f"{path}: header promises {nnz} entries, found {len(body)}")
    counts = np.zeros((K, K), dtype=np.int64)
    for lineno, ln in enumerate(body, start=2):
        parts = ln.split()
        try:
            i, j, c = (int(p) for p in parts)
        except ValueError:
            raise CooccurrenceFormatError(f"{path}:{lineno}: expected 'i j count'") from None
        if not (0 <= i <= j < K) or c <= 0:
            raise CooccurrenceFormatError(f"{path}:{lineno}: invalid entry {ln!r}")
        counts[i, j] = c
        counts[j, i] = c
    counts.setflags(write=False)
    return CooccurrenceMatrix(counts)
