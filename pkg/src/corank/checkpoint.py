"""Model checkpoints: one zip holding ``meta.json`` plus one ``.npy`` per tensor.

Entries are written in a fixed order with a fixed timestamp, so equal models
produce byte-identical files. The ``.npy`` headers carry dtype and shape.
"""
import hashlib
import io
import json
import zipfile
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, TrainConfig
from .corpus import LabelVocab, TokenVocab
from .model import PARAM_NAMES, LabelCoRank, param_shapes

FORMAT = "corank-checkpoint-v1"
_EPOCH = (1980, 1, 1, 0, 0, 0)
# config fields that change the meaning of stored tensors
_SHAPE_FIELDS = ("delta", "gamma", "eta", "d_ff", "max_len", "alpha", "beta", "ablation")


def vocab_hash(tokens, label_names):
    h = hashlib.sha256()
    for part in (tokens, label_names):
        h.update(json.dumps(list(part), ensure_ascii=False).encode("utf-8"))
        h.update(b"\0")
    return h.hexdigest()


@dataclass
class Checkpoint:
    config: TrainConfig
    params: dict
    tokens: list  # token strings by id
    label_names: list
    freq: np.ndarray
    cooc_counts: np.ndarray

    @property
    def n_labels(self):
        return len(self.label_names)

    @property
    def vocab_hash(self):
        return vocab_hash(self.tokens, self.label_names)

    def token_vocab(self):
        mapping = {t: i for i, t in enumerate(self.tokens)}
        return TokenVocab(mapping, mapping["[CLS]"], mapping["[UNK]"])

    def label_vocab(self):
        return LabelVocab({n: i for i, n in enumerate(self.label_names)}, self.freq.copy())

    def model(self):
        return LabelCoRank(self.config, len(self.tokens), self.n_labels, self.cooc_counts,
                           self.freq, params=self.params)


def _npy_bytes(arr):
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()


def _write(zf, name, data):
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def save_checkpoint(path, model, token_vocab, label_vocab):
    tokens = token_vocab.tokens()
    names = label_vocab.names()
    meta = {
        "format": FORMAT,
        "config": model.config.to_dict(),
        "n_tokens": len(tokens),
        "n_labels": len(names),
        "vocab_hash": vocab_hash(tokens, names),
        "tokens": tokens,
        "labels": names,
    }
    with zipfile.ZipFile(path, "w") as zf:
        _write(zf, "meta.json", json.dumps(meta, sort_keys=True, ensure_ascii=False).encode("utf-8"))
        for name in PARAM_NAMES:
            _write(zf, f"params/{name}.npy", _npy_bytes(model.params[name]))
        _write(zf, "freq.npy", _npy_bytes(model.freq))
        _write(zf, "cooc.npy", _npy_bytes(model.cooc_counts))


def _read_array(zf, name):
    return np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)


def load_checkpoint(path, expect_config=None, expect_vocab_hash=None):
    """Read a checkpoint, optionally rejecting one trained under a different setup."""
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json").decode("utf-8"))
            if meta.get("format") != FORMAT:
                raise ConfigError(f"{path}: not a {FORMAT} file")
            params = {n: _read_array(zf, f"params/{n}.npy") for n in PARAM_NAMES}
            freq = _read_array(zf, "freq.npy")
            cooc = _read_array(zf, "cooc.npy")
    except (zipfile.BadZipFile, KeyError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: unreadable checkpoint ({exc})") from None

    config = TrainConfig.from_dict(meta["config"])
    ckpt = Checkpoint(config, params, meta["tokens"], meta["labels"], freq, cooc)
    if ckpt.vocab_hash != meta["vocab_hash"]:
        raise ConfigError(f"{path}: vocabulary hash mismatch (file corrupted?)")
    shapes = param_shapes(config, meta["n_tokens"], meta["n_labels"])
    for name in PARAM_NAMES:
        if params[name].shape != shapes[name]:
            raise ConfigError(f"{path}: tensor {name} has shape {params[name].shape}, config implies {shapes[name]}")

    if expect_config is not None:
        diff = [f for f in _SHAPE_FIELDS if getattr(expect_config, f) != getattr(config, f)]
        if diff:
            raise ConfigError(f"{path}: checkpoint config differs in {', '.join(diff)}")
    if expect_vocab_hash is not None and expect_vocab_hash != ckpt.vocab_hash:
        raise ConfigError(f"{path}: checkpoint was trained with a different vocabulary")
    return ckpt


def file_digest(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()
