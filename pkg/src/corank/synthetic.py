"""Synthetic long-tail corpus with planted head -> tail label co-occurrence.

Each document draws 1-3 head labels and, for every head, 1-2 of that head's
own tail labels (Zipf-weighted, so a few tail labels are common and most are
rare). Tail labels never occur without their parent head.

Text is built so that head labels are easy to read off the words (several
indicative words each) while tail labels are not: a tail label contributes a
single indicative word, and every document also carries indicative words of
unrelated tail labels as distractors.
"""
from dataclasses import dataclass

import numpy as np

from .corpus import Dataset, Document, LabelVocab, TokenVocab


@dataclass(frozen=True)
class SyntheticSpec:
    n_head: int = 6
    tails_per_head: int = 9
    n_train: int = 3000
    n_test: int = 600
    head_words: int = 6  # indicative vocabulary per head label
    tail_words: int = 3
    words_per_head: int = 6  # indicative words emitted per head label in a document
    words_per_tail: int = 1
    distractors: int = 2
    n_noise_words: int = 300
    noise_len: tuple = (25, 40)
    head_counts: tuple = (0.6, 0.3, 0.1)  # P(1, 2, 3 head labels)
    tail_counts: tuple = (0.6, 0.4)  # P(1, 2 tail labels per head)
    head_zipf: float = 0.5
    tail_zipf: float = 1.0

    @property
    def n_labels(self):
        return self.n_head * (1 + self.tails_per_head)


def _zipf(n, s):
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


def label_names(spec):
    heads = [f"H{h}" for h in range(spec.n_head)]
    tails = [f"T{h}_{j}" for h in range(spec.n_head) for j in range(spec.tails_per_head)]
    return heads + tails


def _words(spec):
    words = []
    for h in range(spec.n_head):
        words += [f"h{h}w{k}" for k in range(spec.head_words)]
    for h in range(spec.n_head):
        for j in range(spec.tails_per_head):
            words += [f"t{h}x{j}w{k}" for k in range(spec.tail_words)]
    words += [f"n{k}" for k in range(spec.n_noise_words)]
    return words


def _tail_id(spec, h, j):
    return spec.n_head + h * spec.tails_per_head + j


def _draw(spec, rng, vocab):
    ids = vocab.token_to_id
    n_heads = min(1 + rng.choice(len(spec.head_counts), p=spec.head_counts), spec.n_head)
    heads = rng.choice(spec.n_head, size=n_heads, replace=False, p=_zipf(spec.n_head, spec.head_zipf))
    labels = []
    words = []
    for h in heads:
        labels.append(int(h))
        for _ in range(spec.words_per_head):
            words.append(f"h{h}w{rng.integers(spec.head_words)}")
        n_tails = min(1 + rng.choice(len(spec.tail_counts), p=spec.tail_counts), spec.tails_per_head)
        tails = rng.choice(spec.tails_per_head, size=n_tails, replace=False,
                           p=_zipf(spec.tails_per_head, spec.tail_zipf))
        for j in tails:
            labels.append(_tail_id(spec, h, int(j)))
            for _ in range(spec.words_per_tail):
                words.append(f"t{h}x{j}w{rng.integers(spec.tail_words)}")
    for _ in range(spec.distractors):
        h = rng.integers(spec.n_head)
        j = rng.integers(spec.tails_per_head)
        words.append(f"t{h}x{j}w{rng.integers(spec.tail_words)}")
    n_noise = rng.integers(spec.noise_len[0], spec.noise_len[1] + 1)
    words += [f"n{k}" for k in rng.integers(spec.n_noise_words, size=n_noise)]
    rng.shuffle(words)
    tokens = (vocab.cls_id,) + tuple(ids[w] for w in words)
    return tokens, frozenset(labels), len(words)


def make_corpus(seed=0, spec=SyntheticSpec()):
    """Return ``(train, test)`` datasets sharing one token and label vocabulary."""
    rng = np.random.default_rng(seed)
    vocab = TokenVocab.build([_words(spec)])
    names = label_names(spec)
    name_ids = {n: i for i, n in enumerate(names)}
    splits = []
    for split, n_docs in (("train", spec.n_train), ("test", spec.n_test)):
        docs = []
        for r in range(n_docs):
            tokens, labels, n_words = _draw(spec, rng, vocab)
            docs.append(Document(f"{split}-{r}", tokens, labels, n_words))
        splits.append(docs)
    label_vocab = LabelVocab.from_documents(names, splits[0])
    assert label_vocab.name_to_id == name_ids
    types = frozenset(vocab.token_to_id) - {"[CLS]", "[UNK]"}
    train = Dataset(tuple(splits[0]), vocab, label_vocab, types)
    test = Dataset(tuple(splits[1]), vocab, label_vocab, types)
    return train, test
