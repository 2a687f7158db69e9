"""Model and training configuration records.

Defaults follow the full-scale recipe (512-wide, 12 encoder blocks, joint
loss with weight 0.1 and temperature 0.1, Adam at 3e-4 decaying 10x after
epoch 4). ``ModelConfig.toy()`` is the desk-scale variant the test suite
trains.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .validation import ConfigError

FUSION_MODES = (
    "corner_query",
    "corner_kv",
    "concat",
    "add",
    "multiply",
    "image_image",
    "self_attn_x2",
    "none",
)

# Modes in which the encoder keeps a corner/auxiliary branch alive.
AUX_BRANCH_MODES = ("corner_query", "corner_kv", "concat", "add", "multiply", "image_image")


@dataclass
class ModelConfig:
    d_model: int = 512
    n_heads: int = 8
    n_enc_blocks: int = 12
    n_dec_blocks: int = 6
    ffn_dim: int = 2048
    max_len: int = 25
    proj_hidden: int = 2048
    proj_out: int = 2048
    fusion_mode: str = "corner_query"
    vocab_size: int = 39
    image_h: int = 32
    image_w: int = 128

    def __post_init__(self):
        if self.d_model < 1 or self.d_model % 2:
            raise ConfigError(f"d_model must be a positive even width, got {self.d_model}")
        if self.n_heads < 1 or self.d_model % self.n_heads:
            raise ConfigError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        if self.max_len < 1:
            raise ConfigError(f"max_len must be >= 1, got {self.max_len}")
        for name in ("n_enc_blocks", "n_dec_blocks", "ffn_dim", "proj_hidden", "proj_out", "vocab_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.fusion_mode not in FUSION_MODES:
            raise ConfigError(
                f"unknown fusion_mode {self.fusion_mode!r}; expected one of {FUSION_MODES}"
            )
        if self.image_h % 4 or self.image_w % 4:
            raise ConfigError(
                f"image size must be divisible by 4 (two stride-2 stems), got "
                f"{self.image_h}x{self.image_w}"
            )

    @property
    def feat_h(self) -> int:
        return self.image_h // 4

    @property
    def feat_w(self) -> int:
        return self.image_w // 4

    @property
    def seq_len(self) -> int:
        return self.feat_h * self.feat_w

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @classmethod
    def toy(cls, **overrides) -> "ModelConfig":
        """Desk-scale configuration used by the training smoke tests."""
        base = dict(
            d_model=64,
            n_heads=4,
            n_enc_blocks=3,
            n_dec_blocks=2,
            ffn_dim=256,
            proj_hidden=128,
            proj_out=128,
        )
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown ModelConfig keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainConfig:
    lr: float = 3e-4
    lr_decay_factor: float = 0.1
    decay_epoch: int = 4
    batch_size: int = 32
    epochs: int = 6
    seed: int = 0
    cc_weight: float = 0.1  # joint-objective weight on the contrastive term
    temperature: float = 0.1  # contrastive similarity scale
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float | None = None
    max_steps: int | None = None
    cc_include_pad: bool = False
    cc_raw_sum: bool = False
    augment: bool = False
    cache_corner_maps: bool = True

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not (0 < self.decay_epoch <= self.epochs):
            raise ConfigError(
                f"decay_epoch must satisfy 0 < decay_epoch <= epochs, got "
                f"{self.decay_epoch} with epochs={self.epochs}"
            )
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.cc_weight < 0:
            raise ConfigError(f"cc_weight must be >= 0, got {self.cc_weight}")
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be > 0, got {self.temperature}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError(f"grad_clip must be > 0 when set, got {self.grad_clip}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**d)


def load_config_file(path, cls):
    """Read a JSON key-value document into a config dataclass."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file {path} is not valid JSON: {err}") from err
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return cls.from_dict(payload)
