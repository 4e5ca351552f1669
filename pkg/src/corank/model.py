"""The two-stage network: encoder, initial classifier, label fusion, label attention.

Everything is plain numpy with hand-written backward passes. Batches are
padded to the longest document; ``mask`` marks real tokens.

Shapes used throughout: ``B`` documents, ``n`` token positions, ``d`` hidden
size, ``K`` labels, ``g`` reranked sequence length, ``h`` heads of width
``dk = d // h``.
"""
from dataclasses import dataclass

import numpy as np

from .config import ConfigError
from .rerank import rerank_batch

MASK_VALUE = -1e9
PROB_CLIP = 1e-7

PARAM_NAMES = (
    "tok_emb", "pos_emb",
    "W1", "b1", "W2", "b2",
    "M_f", "M_pos", "W3", "b3", "W4", "b4",
    "Wq", "Wk", "Wv",
    "W5", "b5",
)
ENCODER_PARAMS = ("tok_emb", "pos_emb")
STAGE1_PARAMS = ENCODER_PARAMS + ("W1", "b1", "W2", "b2")


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def param_shapes(config, n_tokens, n_labels):
    d, g, f = config.delta, config.gamma, config.ffn_width
    return {
        "tok_emb": (n_tokens, d), "pos_emb": (config.max_len, d),
        "W1": (d, d), "b1": (d,), "W2": (d, n_labels), "b2": (n_labels,),
        "M_f": (n_labels, d), "M_pos": (g, d),
        "W3": (d, f), "b3": (f,), "W4": (f, d), "b4": (d,),
        "Wq": (d, d), "Wk": (d, d), "Wv": (d, d),
        "W5": (g * d, n_labels), "b5": (n_labels,),
    }


def init_params(config, n_tokens, n_labels, rng, label_prior=None):
    """Random initial parameters.

    Embedding tables are N(0, 1) (positional ones N(0, 0.1)), projections
    N(0, 1/fan_in), biases zero. With ``label_prior`` both output biases start
    at the prior log-odds.
    """
    shapes = param_shapes(config, n_tokens, n_labels)
    params = {}
    for name in PARAM_NAMES:
        shape = shapes[name]
        if name in ("tok_emb", "M_f"):
            params[name] = rng.normal(0.0, 1.0, shape)
        elif name in ("pos_emb", "M_pos"):
            params[name] = rng.normal(0.0, 0.1, shape)
        elif name.startswith("b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.normal(0.0, 1.0 / np.sqrt(shape[0]), shape)
    if label_prior is not None:
        p = np.clip(np.asarray(label_prior, dtype=np.float64), 1e-4, 1 - 1e-4)
        params["b2"] = np.log(p / (1 - p))
        params["b5"] = params["b2"].copy()
    return params


def pad_batch(token_seqs, pad_id=0):
    """Right-pad token id sequences; returns ``(tokens, mask)``."""
    n = max(len(t) for t in token_seqs)
    tokens = np.full((len(token_seqs), n), pad_id, dtype=np.int64)
    mask = np.zeros((len(token_seqs), n), dtype=bool)
    for r, seq in enumerate(token_seqs):
        tokens[r, : len(seq)] = seq
        mask[r, : len(seq)] = True
    return tokens, mask


# ---------------------------------------------------------------------------
# forward building blocks
# ---------------------------------------------------------------------------

@dataclass
class EncoderOutput:
    H: np.ndarray  # (B, n, d)
    h_cls: np.ndarray  # (B, d)
    valid_mask: np.ndarray  # (B, n) bool
    n_context: np.ndarray  # (B,) non-CLS tokens averaged into the CLS row


def encode(tokens, mask, tok_emb, pos_emb):
    """Toy encoder: token + position embeddings; CLS row also receives the mean of the other rows.

    Without the mean term the CLS row would be the same for every document.
    """
    tokens = np.atleast_2d(np.asarray(tokens, dtype=np.int64))
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    if tokens.shape[1] == 0:
        raise ValueError("empty token sequence")
    if tokens.min() < 0 or tokens.max() >= tok_emb.shape[0]:
        raise IndexError("token id outside the embedding table")
    n = tokens.shape[1]
    if n > pos_emb.shape[0]:
        raise ValueError(f"sequence length {n} exceeds max_len {pos_emb.shape[0]}")
    X = (tok_emb[tokens] + pos_emb[None, :n]) * mask[..., None]
    n_ctx = mask[:, 1:].sum(axis=1)
    ctx = X[:, 1:].sum(axis=1) / np.maximum(n_ctx, 1)[:, None]
    H = X.copy()
    H[:, 0] += ctx
    return EncoderOutput(H, H[:, 0], mask, n_ctx)


def pool(h_cls, W1, b1):
    return np.tanh(h_cls @ W1 + b1)


def initial_scores(P, W2, b2):
    return sigmoid(P @ W2 + b2)


def label_features(labels, M_f, M_pos, use_position=True):
    F = M_f[labels]
    if use_position:
        F = F + M_pos
    return F


def _dropout_mask(shape, rate, rng):
    if rate <= 0.0:
        return None
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def fuse_label_features(labels, M_f, M_pos, W3, b3, W4, b4, drop_rate=0.0, training=False,
                        rng=None, use_position=True):
    """Label features plus positions, passed through a one-hidden-layer FFN."""
    F = label_features(np.asarray(labels), M_f, M_pos, use_position)
    Z = F @ W3 + b3
    if training and drop_rate > 0.0:
        Z = Z * _dropout_mask(Z.shape, drop_rate, rng)
    return np.maximum(Z, 0.0) @ W4 + b4


def _split_heads(X, eta):
    B, m, d = X.shape
    return X.reshape(B, m, eta, d // eta).transpose(0, 2, 1, 3)


def _merge_heads(X):
    B, eta, m, dk = X.shape
    return X.transpose(0, 2, 1, 3).reshape(B, m, eta * dk)


def _attention(Fh, H, valid_mask, Wq, Wk, Wv, eta):
    eta_dk = Wq.shape[1]
    scale = 1.0 / np.sqrt(eta_dk // eta)
    Q = _split_heads(Fh @ Wq, eta)  # (B, h, g, dk)
    K = _split_heads(H @ Wk, eta)  # (B, h, n, dk)
    V = _split_heads(H @ Wv, eta)
    scores = Q @ K.transpose(0, 1, 3, 2) * scale
    scores = scores + np.where(valid_mask, 0.0, MASK_VALUE)[:, None, None, :]
    scores -= scores.max(axis=-1, keepdims=True)
    A = np.exp(scores) * valid_mask[:, None, None, :]
    A /= A.sum(axis=-1, keepdims=True)
    return _merge_heads(A @ V), A, Q, K, V


def masked_multihead_attention(Fh, H, valid_mask, Wq, Wk, Wv, eta):
    """Label rows of ``Fh`` query the token rows of ``H``; padded tokens get zero weight.

    Returns ``(context, weights)`` with shapes ``(B, g, d)`` and ``(B, h, g, n)``.
    """
    out, A, *_ = _attention(Fh, H, np.asarray(valid_mask, dtype=bool), Wq, Wk, Wv, eta)
    return out, A


def final_scores(attended, W5, b5):
    B = attended.shape[0]
    return sigmoid(attended.reshape(B, -1) @ W5 + b5)


def bce_loss(pred, truth):
    """Binary cross-entropy averaged over labels (and over rows for 2-D input)."""
    p = np.clip(np.asarray(pred, dtype=np.float64), PROB_CLIP, 1.0 - PROB_CLIP)
    y = np.asarray(truth, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _bce_logit_grad(p, y):
    # d bce / d logit for one row, zero where the clip is active
    inside = (p > PROB_CLIP) & (p < 1.0 - PROB_CLIP)
    return (p - y) * inside / p.shape[-1]


def combined_loss(l1, l2, beta):
    return beta * l1 + (1.0 - beta) * l2


# ---------------------------------------------------------------------------
# full model
# ---------------------------------------------------------------------------

@dataclass
class ForwardTrace:
    tokens: np.ndarray
    mask: np.ndarray
    enc: EncoderOutput
    P: np.ndarray
    S1: np.ndarray
    labels: np.ndarray = None  # (B, g) reranked label ids
    is_seed: np.ndarray = None
    F: np.ndarray = None
    Z3: np.ndarray = None
    drop: np.ndarray = None
    R: np.ndarray = None
    Fh: np.ndarray = None
    Q: np.ndarray = None
    K: np.ndarray = None
    V: np.ndarray = None
    attn: np.ndarray = None  # (B, h, g, n)
    fcat: np.ndarray = None
    Y: np.ndarray = None

    @property
    def output(self):
        """Final label scores: Y, or S1 when the second stage is disabled."""
        return self.S1 if self.Y is None else self.Y


class LabelCoRank:
    """Parameters plus the fixed label statistics the rerank step needs."""

    def __init__(self, config, n_tokens, n_labels, cooc_counts, freq, params=None, label_prior=None):
        config.validate(n_labels)
        self.config = config
        self.n_tokens = n_tokens
        self.n_labels = n_labels
        self.cooc_counts = np.ascontiguousarray(cooc_counts, dtype=np.int64)
        self.freq = np.asarray(freq, dtype=np.int64)
        if self.cooc_counts.shape != (n_labels, n_labels) or self.freq.shape != (n_labels,):
            raise ConfigError("co-occurrence matrix / frequency vector do not match K")
        if params is None:
            rng = np.random.default_rng(config.seed)
            params = init_params(config, n_tokens, n_labels, rng, label_prior)
        shapes = param_shapes(config, n_tokens, n_labels)
        for name in PARAM_NAMES:
            if name not in params:
                raise ConfigError(f"missing parameter {name}")
            if params[name].shape != shapes[name]:
                raise ConfigError(f"parameter {name} has shape {params[name].shape}, expected {shapes[name]}")
        self.params = params

    @property
    def stage1_only(self):
        return self.config.ablation == "no_rerank_all"

    def rerank(self, S1):
        cfg = self.config
        return rerank_batch(S1, self.cooc_counts, self.freq, cfg.alpha, cfg.gamma, cfg.ablation)

    def forward(self, tokens, mask, training=False, rng=None):
        p = self.params
        cfg = self.config
        enc = encode(tokens, mask, p["tok_emb"], p["pos_emb"])
        P = pool(enc.h_cls, p["W1"], p["b1"])
        S1 = initial_scores(P, p["W2"], p["b2"])
        tr = ForwardTrace(np.atleast_2d(np.asarray(tokens, dtype=np.int64)), enc.valid_mask, enc, P, S1)
        if self.stage1_only:
            return tr

        tr.labels, tr.is_seed = self.rerank(S1)
        tr.F = label_features(tr.labels, p["M_f"], p["M_pos"], cfg.ablation != "no_position")
        tr.Z3 = tr.F @ p["W3"] + p["b3"]
        D = tr.Z3
        if training and cfg.drop_rate > 0.0:
            tr.drop = _dropout_mask(D.shape, cfg.drop_rate, rng)
            D = D * tr.drop
        tr.R = np.maximum(D, 0.0)
        tr.Fh = tr.R @ p["W4"] + p["b4"]

        out, tr.attn, tr.Q, tr.K, tr.V = _attention(
            tr.Fh, enc.H, enc.valid_mask, p["Wq"], p["Wk"], p["Wv"], cfg.eta)
        tr.fcat = out.reshape(out.shape[0], -1)
        tr.Y = sigmoid(tr.fcat @ p["W5"] + p["b5"])
        return tr

    def losses(self, trace, truth):
        l1 = bce_loss(trace.S1, truth)
        if self.stage1_only:
            return {"L": l1, "L1": l1, "L2": float("nan")}
        l2 = bce_loss(trace.Y, truth)
        return {"L": combined_loss(l1, l2, self.config.beta), "L1": l1, "L2": l2}

    def backward(self, trace, truth):
        """Gradients of the batch-mean combined loss for every parameter.

        The reranked label ids are treated as constants. With the
        ``no_rerank_all`` ablation the objective is the stage-1 loss alone.
        """
        p = self.params
        cfg = self.config
        y = np.atleast_2d(np.asarray(truth, dtype=np.float64))
        B = y.shape[0]
        grads = {name: np.zeros_like(p[name]) for name in PARAM_NAMES}
        enc = trace.enc
        w1 = 1.0 if self.stage1_only else cfg.beta
        dH = np.zeros_like(enc.H)

        if not self.stage1_only:
            dz2 = (1.0 - cfg.beta) * _bce_logit_grad(trace.Y, y) / B
            grads["W5"] = trace.fcat.T @ dz2
            grads["b5"] = dz2.sum(axis=0)
            g_len = cfg.gamma
            dO = _split_heads((dz2 @ p["W5"].T).reshape(B, g_len, cfg.delta), cfg.eta)

            Q, K, V, A = trace.Q, trace.K, trace.V, trace.attn
            scale = 1.0 / np.sqrt(cfg.head_dim)
            dA = dO @ V.transpose(0, 1, 3, 2)
            dV = A.transpose(0, 1, 3, 2) @ dO
            dS = A * (dA - np.sum(dA * A, axis=-1, keepdims=True)) * scale
            dQ = _merge_heads(dS @ K)
            dK = _merge_heads(dS.transpose(0, 1, 3, 2) @ Q)
            dV = _merge_heads(dV)
            grads["Wq"] = np.einsum("bgi,bgj->ij", trace.Fh, dQ)
            grads["Wk"] = np.einsum("bti,btj->ij", enc.H, dK)
            grads["Wv"] = np.einsum("bti,btj->ij", enc.H, dV)
            dH += dK @ p["Wk"].T + dV @ p["Wv"].T
            dFh = dQ @ p["Wq"].T

            grads["W4"] = np.einsum("bgf,bgd->fd", trace.R, dFh)
            grads["b4"] = dFh.sum(axis=(0, 1))
            dD = (dFh @ p["W4"].T) * (trace.R > 0)
            dZ3 = dD if trace.drop is None else dD * trace.drop
            grads["W3"] = np.einsum("bgd,bgf->df", trace.F, dZ3)
            grads["b3"] = dZ3.sum(axis=(0, 1))
            dF = dZ3 @ p["W3"].T
            np.add.at(grads["M_f"], trace.labels, dF)
            if cfg.ablation != "no_position":
                grads["M_pos"] = dF.sum(axis=0)

        dz1 = w1 * _bce_logit_grad(trace.S1, y) / B
        grads["W2"] = trace.P.T @ dz1
        grads["b2"] = dz1.sum(axis=0)
        dzp = (dz1 @ p["W2"].T) * (1.0 - trace.P ** 2)
        grads["W1"] = enc.h_cls.T @ dzp
        grads["b1"] = dzp.sum(axis=0)
        dH[:, 0] += dzp @ p["W1"].T

        # encoder: CLS row = X[0] + mean(X[1:valid])
        dX = dH.copy()
        dX[:, 1:] += dH[:, :1] / np.maximum(enc.n_context, 1)[:, None, None]
        dX *= enc.valid_mask[..., None]
        np.add.at(grads["tok_emb"], trace.tokens, dX)
        n = dX.shape[1]
        grads["pos_emb"][:n] = dX.sum(axis=0)
        return grads

    def loss_and_grads(self, tokens, mask, truth, training=False, rng=None):
        trace = self.forward(tokens, mask, training=training, rng=rng)
        return self.losses(trace, truth), self.backward(trace, truth), trace

    def predict(self, documents, batch_size=256):
        """Final label scores, one row per document."""
        docs = list(documents)
        out = np.empty((len(docs), self.n_labels))
        for lo in range(0, len(docs), batch_size):
            chunk = docs[lo: lo + batch_size]
            tokens, mask = pad_batch([d.tokens for d in chunk])
            out[lo: lo + len(chunk)] = self.forward(tokens, mask).output
        return out

    def trace_document(self, doc):
        tokens, mask = pad_batch([doc.tokens])
        return self.forward(tokens, mask)
