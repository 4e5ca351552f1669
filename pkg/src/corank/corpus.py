"""JSONL ingestion, token/label vocabularies, corpus statistics, head/tail subsets."""
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

CLS_TOKEN = "[CLS]"
UNK_TOKEN = "[UNK]"
DEFAULT_MAX_LEN = 512

_WORD_RE = re.compile(r"\w+", re.UNICODE)


class DataError(ValueError):
    """Raised for malformed or inconsistent corpus input."""


def tokenize(text):
    """Lowercase and split on whitespace and punctuation."""
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class Document:
    id: str
    tokens: tuple  # token ids, CLS first, truncated to max_len
    labels: frozenset  # label ids
    n_words: int = 0  # untruncated word count, CLS excluded


@dataclass(frozen=True)
class TokenVocab:
    token_to_id: dict
    cls_id: int = 0
    unk_id: int = 1

    @classmethod
    def build(cls, token_lists):
        """Reserve CLS=0, UNK=1; remaining ids follow sorted token order."""
        types = set()
        for toks in token_lists:
            types.update(toks)
        types.discard(CLS_TOKEN)
        types.discard(UNK_TOKEN)
        mapping = {CLS_TOKEN: 0, UNK_TOKEN: 1}
        for i, tok in enumerate(sorted(types), start=2):
            mapping[tok] = i
        return cls(mapping, 0, 1)

    def __len__(self):
        return len(self.token_to_id)

    def encode(self, words, max_len=DEFAULT_MAX_LEN):
        ids = [self.cls_id]
        ids.extend(self.token_to_id.get(w, self.unk_id) for w in words[: max_len - 1])
        return tuple(ids)

    def tokens(self):
        """Token strings ordered by id."""
        out = [None] * len(self.token_to_id)
        for tok, i in self.token_to_id.items():
            out[i] = tok
        return out


@dataclass(frozen=True)
class LabelVocab:
    name_to_id: dict
    frequency: np.ndarray = field(compare=False)

    @property
    def size(self):
        return len(self.name_to_id)

    def names(self):
        out = [None] * len(self.name_to_id)
        for name, i in self.name_to_id.items():
            out[i] = name
        return out

    @classmethod
    def from_documents(cls, names, documents):
        """Vocabulary over ``names`` (already id-ordered) with frequencies counted on ``documents``."""
        freq = np.zeros(len(names), dtype=np.int64)
        for doc in documents:
            for lab in doc.labels:
                freq[lab] += 1
        return cls({n: i for i, n in enumerate(names)}, freq)


@dataclass(frozen=True)
class Dataset:
    documents: tuple
    token_vocab: TokenVocab
    label_vocab: LabelVocab
    word_types: frozenset = frozenset()
    dropped_labels: int = 0

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    @property
    def n_labels(self):
        return self.label_vocab.size

    def subset(self, documents):
        return Dataset(tuple(documents), self.token_vocab, self.label_vocab, self.word_types, 0)

    def label_indicator(self):
        """Dense N x K 0/1 matrix of ground-truth labels."""
        y = np.zeros((len(self.documents), self.n_labels), dtype=np.float64)
        for r, doc in enumerate(self.documents):
            y[r, list(doc.labels)] = 1.0
        return y

    def label_csr(self):
        indptr = np.zeros(len(self.documents) + 1, dtype=np.int64)
        flat = []
        for r, doc in enumerate(self.documents):
            labs = sorted(doc.labels)
            flat.extend(labs)
            indptr[r + 1] = indptr[r] + len(labs)
        return indptr, np.asarray(flat, dtype=np.int64)


@dataclass(frozen=True)
class DatasetStats:
    n_train: int
    n_test: int
    vocab_size: int
    label_count: int
    labels_per_doc_avg: float
    words_per_doc_avg: float

    def to_dict(self):
        return {
            "N_trn": self.n_train,
            "N_tst": self.n_test,
            "D": self.vocab_size,
            "L": self.label_count,
            "L_avg": self.labels_per_doc_avg,
            "W_avg": self.words_per_doc_avg,
        }


def _read_jsonl(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            for key, typ in (("id", str), ("text", str), ("labels", list)):
                if not isinstance(obj.get(key), typ):
                    raise DataError(f"{path}:{lineno}: field {key!r} missing or not a {typ.__name__}")
            if not all(isinstance(x, str) for x in obj["labels"]):
                raise DataError(f"{path}:{lineno}: labels must be strings")
            records.append((lineno, obj))
    return records


def load_dataset(path, split="train", token_vocab=None, label_vocab=None, max_len=DEFAULT_MAX_LEN):
    """Read a JSONL corpus into a :class:`Dataset`.

    For the train split the vocabularies are built from the file unless given.
    For the test split both vocabularies are required; labels unknown to the
    training vocabulary are dropped and counted in ``dropped_labels``.
    """
    if split not in ("train", "test"):
        raise ValueError(f"unknown split {split!r}")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    records = _read_jsonl(path)
    words = [tokenize(obj["text"]) for _, obj in records]

    if split == "train":
        for lineno, obj in records:
            if not obj["labels"]:
                raise DataError(f"{path}:{lineno}: training document has no labels")
        if token_vocab is None:
            token_vocab = TokenVocab.build(words)
        if label_vocab is None:
            names = sorted({lab for _, obj in records for lab in obj["labels"]})
            label_vocab = LabelVocab({n: i for i, n in enumerate(names)}, np.zeros(len(names), np.int64))
            fill_freq = True
        else:
            fill_freq = False
    else:
        if token_vocab is None or label_vocab is None:
            raise ValueError("test split needs the training token and label vocabularies")
        fill_freq = False

    docs = []
    dropped = 0
    for (lineno, obj), ws in zip(records, words):
        labs = set()
        for name in obj["labels"]:
            lab = label_vocab.name_to_id.get(name)
            if lab is None:
                if split == "train":
                    raise DataError(f"{path}:{lineno}: label {name!r} not in label vocabulary")
                dropped += 1
                continue
            labs.add(lab)
        docs.append(Document(obj["id"], token_vocab.encode(ws, max_len), frozenset(labs), len(ws)))
    if dropped:
        log.warning("%s: dropped %d label occurrences not seen in training", path, dropped)
    if fill_freq:
        label_vocab = LabelVocab.from_documents(label_vocab.names(), docs)
    types = frozenset(w for ws in words for w in ws)
    return Dataset(tuple(docs), token_vocab, label_vocab, types, dropped)


def write_jsonl(dataset, path):
    """Write documents back out as JSONL (token ids rendered via the vocabulary)."""
    toks = dataset.token_vocab.tokens()
    names = dataset.label_vocab.names()
    with open(path, "w", encoding="utf-8") as fh:
        for doc in dataset:
            text = " ".join(toks[t] for t in doc.tokens[1:])
            labels = [names[i] for i in sorted(doc.labels)]
            fh.write(json.dumps({"id": doc.id, "text": text, "labels": labels}) + "\n")


def compute_stats(train, test):
    docs = list(train.documents) + list(test.documents)
    if not docs:
        raise DataError("cannot compute statistics of an empty dataset")
    n = len(docs)
    return DatasetStats(
        n_train=len(train),
        n_test=len(test),
        vocab_size=len(train.word_types | test.word_types),
        label_count=train.n_labels,
        labels_per_doc_avg=sum(len(d.labels) for d in docs) / n,
        words_per_doc_avg=sum(d.n_words for d in docs) / n,
    )


def head_labels(vocab, head_fraction=0.10):
    """Top ceil(head_fraction * K) labels by training frequency, lower id first on ties."""
    if not 0.0 < head_fraction < 1.0:
        raise ValueError("head_fraction must lie in (0, 1)")
    k = vocab.size
    n_head = math.ceil(head_fraction * k)
    order = np.argsort(-vocab.frequency, kind="stable")
    return frozenset(int(i) for i in order[:n_head])


def split_head_tail(dataset, vocab, head_fraction=0.10, max_head_count=2):
    """Return (head_subset, tail_subset).

    head_subset: documents whose labels are all head labels.
    tail_subset: documents with at most ``max_head_count`` head labels.
    A document can land in both.
    """
    head = head_labels(vocab, head_fraction)
    head_docs = [d for d in dataset if d.labels and d.labels <= head]
    tail_docs = [d for d in dataset if len(d.labels & head) <= max_head_count]
    return dataset.subset(head_docs), dataset.subset(tail_docs)
