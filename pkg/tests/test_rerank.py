import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corank import kernels
from corank.rerank import (
    EXPANDED,
    SEED,
    expand_labels,
    frequency_rank,
    rerank_batch,
    rerank_pipeline,
    select_seed_labels,
    summed_cooccurrence,
)
from oracles import cooccurrence_oracle, rerank_oracle
from conftest import FIVE_DOC_LABELS

S1 = [0.9, 0.5, 0.2, 0.1, 0.05]
M5 = np.array(cooccurrence_oracle(FIVE_DOC_LABELS, 5))
FREQ5 = np.array([4, 3, 2, 1, 0])


class TestSeeds:
    def test_threshold(self):
        assert select_seed_labels(S1, 0.3, 5) == [0, 1]

    def test_fallback_to_argmax(self):
        assert select_seed_labels(S1, 0.99, 5) == [0]

    def test_tie_breaks_by_id(self):
        assert select_seed_labels([0.4, 0.4], 0.3, 2) == [0, 1]

    def test_truncated_to_gamma_by_score(self):
        assert select_seed_labels([0.5, 0.9, 0.7, 0.8], 0.3, 2) == [1, 3]


class TestExpand:
    def test_five_doc_example(self):
        assert summed_cooccurrence([0, 1], M5).tolist() == [6, 5, 3, 1, 0]
        assert expand_labels([0, 1], M5, 4, FREQ5) == [2, 3]

    def test_no_room(self):
        assert expand_labels([0, 1], M5, 2, FREQ5) == []

    def test_isolated_seed_pads_by_frequency(self):
        assert expand_labels([4], M5, 3, FREQ5) == [0, 1]

    def test_partial_support_then_padding(self):
        # label 3 co-occurs only with 0; need 3 more labels
        assert expand_labels([3], M5, 4, FREQ5) == [0, 1, 2]


class TestFrequencyRank:
    def test_sorted_by_frequency(self):
        assert frequency_rank([3, 1, 0, 2], [4, 3, 2, 1, 0]).labels == (0, 1, 2, 3)

    def test_pair(self):
        assert frequency_rank([3, 0], [4, 3, 2, 1]).labels == (0, 3)

    def test_equal_frequencies_ascending_ids(self):
        assert frequency_rank([5, 2, 9], [1] * 10).labels == (2, 5, 9)

    def test_provenance_follows_labels(self):
        seq = frequency_rank([2, 0], FREQ5, [EXPANDED, SEED])
        assert seq.labels == (0, 2) and seq.provenance == (SEED, EXPANDED)


class TestPipeline:
    def test_worked_example(self):
        seq = rerank_pipeline(S1, M5, FREQ5, 0.3, 4)
        assert seq.labels == (0, 1, 2, 3)
        assert seq.provenance == (SEED, SEED, EXPANDED, EXPANDED)

    def test_gamma_three(self):
        assert rerank_pipeline(S1, M5, FREQ5, 0.3, 3).labels == (0, 1, 2)

    def test_full_length_zero_alpha_is_frequency_order(self):
        freq = np.array([1, 5, 3, 5, 0])
        assert rerank_pipeline(S1, M5, freq, 0.0, 5).labels == (1, 3, 2, 0, 4)

    def test_gamma_above_K_rejected(self):
        with pytest.raises(ValueError):
            rerank_pipeline(S1, M5, FREQ5, 0.3, 6)

    def test_no_cooccur_uses_next_scores(self):
        s1 = [0.9, 0.1, 0.2, 0.5, 0.05]
        seq = rerank_pipeline(s1, M5, FREQ5, 0.3, 3, ablation="no_cooccur")
        assert set(seq.labels) == {0, 3, 2}

    def test_no_freq_rank_keeps_selection_order(self):
        seq = rerank_pipeline([0.1, 0.9, 0.2, 0.5, 0.05], M5, FREQ5, 0.3, 4, ablation="no_freq_rank")
        assert seq.labels == (1, 3, 0, 2)
        assert seq.provenance == (SEED, SEED, EXPANDED, EXPANDED)


def _random_instance(rng):
    K = int(rng.integers(2, 16))
    N = int(rng.integers(0, 30))
    sets = [set(rng.choice(K, size=rng.integers(1, K + 1), replace=False).tolist()) for _ in range(N)]
    M = np.array(cooccurrence_oracle(sets, K), dtype=np.int64).reshape(K, K)
    freq = np.diag(M).copy()
    # coarse scores so ties occur
    s1 = rng.integers(0, 11, size=K) / 10.0
    return K, M, freq, s1


@pytest.mark.parametrize("ablation", ["none", "no_cooccur", "no_freq_rank"])
def test_random_instances_match_oracle(ablation):
    rng = np.random.default_rng(5)
    for _ in range(300):
        K, M, freq, s1 = _random_instance(rng)
        alpha = float(rng.choice([0.1, 0.3, 0.5]))
        gamma = int(rng.integers(1, K + 1))
        exp_labels, exp_prov = rerank_oracle(s1, M.tolist(), freq.tolist(), alpha, gamma, ablation)
        seq = rerank_pipeline(s1, M, freq, alpha, gamma, ablation)
        assert list(seq.labels) == exp_labels
        assert list(seq.provenance) == exp_prov
        labels, is_seed = rerank_batch(s1[None], M, freq, alpha, gamma, ablation)
        assert labels[0].tolist() == exp_labels
        assert [SEED if f else EXPANDED for f in is_seed[0]] == exp_prov


@pytest.mark.parametrize("impl", ["np", "jit"])
def test_batch_kernels_agree(impl):
    fn = {"np": kernels.rerank_rows_np, "jit": kernels.rerank_rows_jit}[impl]
    rng = np.random.default_rng(8)
    K, gamma = 12, 6
    sets = [set(rng.choice(K, size=rng.integers(1, 5), replace=False).tolist()) for _ in range(40)]
    M = np.array(cooccurrence_oracle(sets, K), dtype=np.int64)
    freq = np.diag(M).copy()
    order = np.argsort(-freq, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(K)
    scores = rng.random((50, K))
    scores[::7] *= 0.1  # rows with no seed above alpha
    for mode in (0, 1, 2):
        labels, seeds = fn(scores, M, order, rank, 0.3, gamma, mode)
        for r in range(scores.shape[0]):
            name = ["none", "no_cooccur", "no_freq_rank"][mode]
            exp, prov = rerank_oracle(scores[r], M.tolist(), freq.tolist(), 0.3, gamma, name)
            assert labels[r].tolist() == exp
            assert seeds[r].tolist() == [p == SEED for p in prov]


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(0, 100), min_size=2, max_size=12),
    st.sampled_from([0.1, 0.3, 0.5]),
    st.data(),
)
def test_properties(scores, alpha, data):
    K = len(scores)
    gamma = data.draw(st.integers(1, K))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
    A = rng.integers(0, 4, size=(K, K))
    M = A + A.T
    freq = rng.integers(0, 20, size=K)
    s1 = np.array(scores) / 100.0
    seq = rerank_pipeline(s1, M, freq, alpha, gamma)
    seeds = select_seed_labels(s1, alpha, gamma)

    assert len(seq.labels) == min(gamma, K)
    assert len(set(seq.labels)) == len(seq.labels)
    assert set(seeds) <= set(seq.labels)
    keys = [(-freq[i], i) for i in seq.labels]
    assert keys == sorted(keys)

    # strictly increasing transform, threshold mapped alike
    transformed = rerank_pipeline(np.exp(3 * s1) - 1, M, freq, np.exp(3 * alpha) - 1, gamma)
    assert transformed == seq

    # seed order does not change the summed profile
    assert summed_cooccurrence(seeds[::-1], M).tolist() == summed_cooccurrence(seeds, M).tolist()
