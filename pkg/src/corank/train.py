"""AdamW, the training loop, evaluation helpers and hyper-parameter sweeps."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, TrainConfig
from .cooccur import build_cooccurrence
from .corpus import split_head_tail
from .metrics import DEFAULT_KS, MetricsReport, evaluate
from .model import LabelCoRank, init_params, pad_batch

log = logging.getLogger(__name__)

__all__ = [
    "TrainConfig", "OptimizerState", "adamw_step", "train", "TrainResult",
    "evaluate_model", "sweep", "SWEEPABLE",
]

SWEEPABLE = ("gamma", "alpha", "beta")


@dataclass
class OptimizerState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, 0)


def adamw_step(params, grads, state, lr, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
    """One in-place AdamW update (decoupled weight decay, bias-corrected moments)."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in parameter group {name!r}")
    b1, b2 = betas
    state.step += 1
    t = state.step
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, g in grads.items():
        p = params[name]
        m = state.m[name]
        v = state.v[name]
        if weight_decay:
            p -= lr * weight_decay * p
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


@dataclass
class TrainResult:
    model: LabelCoRank
    log: list = field(default_factory=list)  # dicts: epoch, L, L1, L2

    def loss_csv(self):
        lines = ["epoch,L,L1,L2"]
        for row in self.log:
            lines.append(f"{row['epoch']},{row['L']:.8f},{row['L1']:.8f},{row['L2']:.8f}")
        return "\n".join(lines) + "\n"


def _truncate(tokens, max_len):
    return tokens[:max_len]


def train(config, train_set, cooc=None, freq=None, on_epoch=None):
    """Fit a model on ``train_set``; deterministic given ``config.seed``.

    ``cooc`` and ``freq`` default to statistics of ``train_set`` itself.
    """
    K = train_set.n_labels
    config.validate(K)
    if cooc is None:
        cooc = build_cooccurrence(train_set, K)
    counts = cooc.counts if hasattr(cooc, "counts") else np.asarray(cooc)
    if freq is None:
        freq = train_set.label_vocab.frequency
    freq = np.asarray(freq)
    if counts.shape != (K, K) or freq.shape != (K,):
        raise ConfigError("co-occurrence matrix / frequencies do not match the label vocabulary")
    if len(train_set) == 0:
        raise ConfigError("empty training set")

    init_seq, shuffle_seq, drop_seq = np.random.SeedSequence(config.seed).spawn(3)
    prior = freq / max(len(train_set), 1)
    n_tokens = len(train_set.token_vocab)
    params = init_params(config, n_tokens, K, np.random.default_rng(init_seq), prior)
    model = LabelCoRank(config, n_tokens, K, counts, freq, params=params)

    shuffle_rng = np.random.default_rng(shuffle_seq)
    drop_rng = np.random.default_rng(drop_seq)
    state = OptimizerState.zeros_like(model.params)
    docs = train_set.documents
    truth = train_set.label_indicator()
    betas = (config.adam_beta1, config.adam_beta2)
    result = TrainResult(model)

    for epoch in range(1, config.epochs + 1):
        perm = shuffle_rng.permutation(len(docs))
        sums = np.zeros(3)
        n_seen = 0
        for lo in range(0, len(docs), config.batch_size):
            idx = perm[lo: lo + config.batch_size]
            tokens, mask = pad_batch([_truncate(docs[i].tokens, config.max_len) for i in idx])
            losses, grads, _ = model.loss_and_grads(tokens, mask, truth[idx], training=True, rng=drop_rng)
            adamw_step(model.params, grads, state, config.lr, betas, config.adam_eps, config.weight_decay)
            l2 = 0.0 if math.isnan(losses["L2"]) else losses["L2"]
            sums += len(idx) * np.array([losses["L"], losses["L1"], l2])
            n_seen += len(idx)
        mean = sums / n_seen
        row = {"epoch": epoch, "L": mean[0], "L1": mean[1],
               "L2": float("nan") if model.stage1_only else mean[2]}
        result.log.append(row)
        log.info("epoch %d  L=%.5f  L1=%.5f  L2=%.5f", epoch, row["L"], row["L1"], row["L2"])
        if on_epoch is not None:
            on_epoch(row)
    return result


def evaluate_model(model, dataset, ks=DEFAULT_KS, subsets=(), train_vocab=None):
    """Metrics on ``dataset``; ``subsets`` may contain "head" and/or "tail"."""
    docs = list(dataset)
    scores = model.predict([_TruncDoc(d, model.config.max_len) for d in docs])
    truth = dataset.label_indicator()
    report = evaluate(scores, truth, ks)
    if subsets:
        vocab = train_vocab or dataset.label_vocab
        head, tail = split_head_tail(dataset, vocab)
        ids = {id(d): r for r, d in enumerate(docs)}
        for name, sub in (("head", head), ("tail", tail)):
            if name not in subsets:
                continue
            rows = [ids[id(d)] for d in sub]
            if rows:
                report.per_subset[name] = evaluate(scores[rows], truth[rows], ks)
    return report


class _TruncDoc:
    __slots__ = ("tokens",)

    def __init__(self, doc, max_len):
        self.tokens = doc.tokens[:max_len]


def sweep(config, parameter, values, train_set, test_set, ks=DEFAULT_KS, subsets=()):
    """Train and evaluate once per value of ``parameter``; returns (header, rows) of a CSV table."""
    if parameter not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {parameter!r}; choose from {', '.join(SWEEPABLE)}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    K = train_set.n_labels
    configs = [config.override(**{parameter: v}).validate(K) for v in values]
    cooc = build_cooccurrence(train_set, K)
    header = [parameter] + MetricsReport.csv_header(ks).split(",")
    for name in subsets:
        header += [f"{name}_{h}" for h in MetricsReport.csv_header(ks).split(",")]
    rows = []
    for value, cfg in zip(values, configs):
        result = train(cfg, train_set, cooc)
        report = evaluate_model(result.model, test_set, ks, subsets, train_set.label_vocab)
        row = [str(value), report.csv_row(list(ks))]
        n_cols = len(MetricsReport.csv_header(ks).split(","))
        for name in subsets:
            sub = report.per_subset.get(name)
            row.append(sub.csv_row(list(ks)) if sub else ",".join(["nan"] * n_cols))
        rows.append(",".join(row))
    return ",".join(header), rows
