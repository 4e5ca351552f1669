"""Training/model configuration with validation and flat-file loading."""
import json
from dataclasses import asdict, dataclass, fields, replace

ABLATIONS = ("none", "no_cooccur", "no_freq_rank", "no_position", "no_rerank_all")

# per-dataset values used in the published experiments (RoBERTa-base encoder)
PUBLISHED_PRESETS = {
    "mag-cs": {"beta": 0.3, "gamma": 35},
    "pubmed": {"beta": 0.3, "gamma": 30},
    "aapd": {"beta": 0.25, "gamma": 20},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.3
    beta: float = 0.3
    gamma: int = 20
    delta: int = 64
    eta: int = 4
    d_ff: int = 0  # 0 means 4 * delta
    drop_rate: float = 0.1
    lr: float = 1e-3
    weight_decay: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 16
    max_len: int = 512
    epochs: int = 5
    seed: int = 0
    ablation: str = "none"

    @property
    def ffn_width(self):
        return self.d_ff or 4 * self.delta

    @property
    def head_dim(self):
        return self.delta // self.eta

    def validate(self, n_labels=None):
        """Raise :class:`ConfigError` on any violated invariant; return self."""
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError(f"alpha must be in [0, 1), got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must be in [0, 1], got {self.beta}")
        if self.gamma < 1:
            raise ConfigError("gamma must be >= 1")
        if n_labels is not None and self.gamma > n_labels:
            raise ConfigError(f"gamma={self.gamma} exceeds the number of labels K={n_labels}")
        if self.delta < 1 or self.eta < 1 or self.delta % self.eta:
            raise ConfigError(f"delta={self.delta} must be a positive multiple of eta={self.eta}")
        if self.d_ff < 0:
            raise ConfigError("d_ff must be >= 0")
        if not 0.0 <= self.drop_rate < 1.0:
            raise ConfigError("drop_rate must be in [0, 1)")
        if self.lr <= 0 or self.weight_decay < 0 or self.adam_eps <= 0:
            raise ConfigError("lr and adam_eps must be positive, weight_decay non-negative")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise ConfigError("adam betas must be in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0 or self.max_len < 1:
            raise ConfigError("batch_size and max_len must be >= 1, epochs >= 0")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"unknown ablation {self.ablation!r}; choose from {', '.join(ABLATIONS)}")
        return self

    def override(self, **changes):
        """Copy with the non-None entries of ``changes`` applied."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kwargs = {}
        for key, value in data.items():
            typ = type(getattr(cls, key))
            try:
                kwargs[key] = typ(value)
            except (TypeError, ValueError):
                raise ConfigError(f"config key {key!r}: cannot convert {value!r} to {typ.__name__}") from None
        return cls(**kwargs)

    @classmethod
    def published_preset(cls, dataset, **overrides):
        """Hyper-parameters reported for the full-scale runs."""
        try:
            ds = PUBLISHED_PRESETS[dataset.lower()]
        except KeyError:
            raise ConfigError(f"no preset for {dataset!r}") from None
        base = dict(alpha=0.3, lr=1e-5, batch_size=16, max_len=512, delta=768, **ds)
        base.update(overrides)
        return cls(**base)


def parse_config_text(text):
    """Parse a JSON object or flat ``key=value`` lines (``#`` comments allowed)."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return data
    data = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        data[key.strip()] = value.strip()
    return data
