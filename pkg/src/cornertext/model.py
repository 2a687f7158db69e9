"""The corner-guided recognizer network.

Two stride-2 conv stems take the image and the corner map to quarter
resolution; both get 2D sinusoidal position encoding and are flattened to
sequences. Encoder blocks run self-attention, then (fusion-mode dependent) a
cross-attention whose query is the corner feature sequence, then a
feed-forward, all post-norm residual. A causal transformer decoder over the
BOS-shifted label produces per-position hidden states feeding two heads: the
classification logits and the unit-norm contrastive projection.
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .config import AUX_BRANCH_MODES, ModelConfig
from .data import Charset
from .tensor import Tensor
from .validation import ConfigError, DataError, ShapeError

NEG_INF = -1e30


def sinusoid_encoding(positions: np.ndarray, dim: int) -> np.ndarray:
    """Standard interleaved sin/cos encoding, one row per position."""
    half = (dim + 1) // 2
    freqs = np.power(10000.0, -np.arange(half) * 2.0 / dim)
    args = positions[:, None] * freqs[None, :]
    enc = np.zeros((len(positions), 2 * half))
    enc[:, 0::2] = np.sin(args)
    enc[:, 1::2] = np.cos(args)
    return enc[:, :dim]


def pos_encoding_2d(h: int, w: int, d_model: int) -> np.ndarray:
    """(h*w, d_model) encoding: first half encodes row index, second half column."""
    if d_model % 2:
        raise ConfigError(f"2D position encoding needs an even width, got {d_model}")
    half = d_model // 2
    row_enc = sinusoid_encoding(np.arange(h, dtype=np.float64), half)
    col_enc = sinusoid_encoding(np.arange(w, dtype=np.float64), half)
    out = np.zeros((h, w, d_model))
    out[:, :, :half] = row_enc[:, None, :]
    out[:, :, half:] = col_enc[None, :, :]
    return out.reshape(h * w, d_model)


def causal_mask(n: int) -> np.ndarray:
    """Additive mask: position t may attend to keys 0..t only."""
    return np.triu(np.full((n, n), NEG_INF), k=1)


class Module:
    """Minimal parameter container; children discovered by attribute walk."""

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}" if not prefix else f"{prefix}.{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                params[key] = value
            elif isinstance(value, Module):
                params.update(value.parameters(key))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        params.update(item.parameters(f"{key}.{i}"))
        return params


def _uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = math.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, rng, in_dim: int, out_dim: int):
        self.weight = Tensor(_uniform_init(rng, (in_dim, out_dim), in_dim), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return T.matmul(x, self.weight) + self.bias


class Conv2d(Module):
    def __init__(self, rng, in_ch: int, out_ch: int, kernel: int, stride: int, padding: int):
        fan_in = in_ch * kernel * kernel
        self.weight = Tensor(
            _uniform_init(rng, (out_ch, in_ch, kernel, kernel), fan_in), requires_grad=True
        )
        self.bias = Tensor(np.zeros(out_ch), requires_grad=True)
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-6):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.bias = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gain, self.bias, eps=self.eps)


class MultiHeadAttention(Module):
    """Scaled dot-product attention with learned Q/K/V/output projections."""

    def __init__(self, rng, d_model: int, n_heads: int):
        self.wq = Linear(rng, d_model, d_model)
        self.wk = Linear(rng, d_model, d_model)
        self.wv = Linear(rng, d_model, d_model)
        self.wo = Linear(rng, d_model, d_model)
        self.n_heads = n_heads
        self.d_model = d_model
        self.head_dim = d_model // n_heads

    def _split(self, x: Tensor, bsz: int, length: int) -> Tensor:
        # (B, L, d) -> (B*h, L, dh)
        x = x.reshape(bsz, length, self.n_heads, self.head_dim)
        x = x.transpose(0, 2, 1, 3)
        return x.reshape(bsz * self.n_heads, length, self.head_dim)

    def __call__(self, query: Tensor, keyvalue: Tensor, mask=None, capture=None) -> Tensor:
        bsz, qlen, d = query.shape
        klen = keyvalue.shape[1]
        if d != self.d_model or keyvalue.shape[2] != self.d_model:
            raise ShapeError(
                f"attention width mismatch: query {query.shape}, kv {keyvalue.shape}, "
                f"d_model {self.d_model}"
            )
        scale = 1.0 / math.sqrt(self.head_dim)
        q = self._split(self.wq(query) * scale, bsz, qlen)
        k = self._split(self.wk(keyvalue), bsz, klen)
        v = self._split(self.wv(keyvalue), bsz, klen)
        out = T.attention_core(q, k, v, mask=mask, capture=capture)
        out = out.reshape(bsz, self.n_heads, qlen, self.head_dim)
        out = out.transpose(0, 2, 1, 3).reshape(bsz, qlen, self.d_model)
        return self.wo(out)


class FeedForward(Module):
    def __init__(self, rng, d_model: int, hidden: int):
        self.lin1 = Linear(rng, d_model, hidden)
        self.lin2 = Linear(rng, hidden, d_model)

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(T.relu(self.lin1(x)))


class EncoderBlock(Module):
    """Self-attention, optional corner cross-attention, feed-forward (post-norm)."""

    def __init__(self, rng, cfg: ModelConfig):
        self.mode = cfg.fusion_mode
        self.self_attn = MultiHeadAttention(rng, cfg.d_model, cfg.n_heads)
        self.ln1 = LayerNorm(cfg.d_model)
        if self.mode in ("corner_query", "corner_kv", "image_image", "self_attn_x2"):
            self.cross_attn = MultiHeadAttention(rng, cfg.d_model, cfg.n_heads)
            self.ln2 = LayerNorm(cfg.d_model)
        self.ffn = FeedForward(rng, cfg.d_model, cfg.ffn_dim)
        self.ln3 = LayerNorm(cfg.d_model)

    def __call__(self, x: Tensor, aux: Tensor | None, capture=None) -> Tensor:
        x = self.ln1(x + self.self_attn(x, x))
        if self.mode in ("corner_query", "image_image"):
            # The cross-attention residual follows the query stream, as in a
            # standard transformer decoder block. Anchoring the residual on
            # the key/value stream instead leaves the early memory scrambled
            # and desk-scale training collapses into a decoder-only language
            # model that never recovers.
            x = self.ln2(aux + self.cross_attn(aux, x, capture=capture))
        elif self.mode == "corner_kv":
            x = self.ln2(x + self.cross_attn(x, aux, capture=capture))
        elif self.mode == "self_attn_x2":
            x = self.ln2(x + self.cross_attn(x, x, capture=capture))
        return self.ln3(x + self.ffn(x))


class DecoderBlock(Module):
    def __init__(self, rng, cfg: ModelConfig):
        self.self_attn = MultiHeadAttention(rng, cfg.d_model, cfg.n_heads)
        self.ln1 = LayerNorm(cfg.d_model)
        self.cross_attn = MultiHeadAttention(rng, cfg.d_model, cfg.n_heads)
        self.ln2 = LayerNorm(cfg.d_model)
        self.ffn = FeedForward(rng, cfg.d_model, cfg.ffn_dim)
        self.ln3 = LayerNorm(cfg.d_model)

    def __call__(self, x: Tensor, memory: Tensor, mask: np.ndarray) -> Tensor:
        x = self.ln1(x + self.self_attn(x, x, mask=mask))
        x = self.ln2(x + self.cross_attn(x, memory))
        return self.ln3(x + self.ffn(x))


class ConvStem(Module):
    """Two 3x3 stride-2 convolutions with ReLU; spatial extents quartered."""

    def __init__(self, rng, in_ch: int, d_model: int):
        self.conv1 = Conv2d(rng, in_ch, d_model, kernel=3, stride=2, padding=1)
        self.conv2 = Conv2d(rng, d_model, d_model, kernel=3, stride=2, padding=1)

    def __call__(self, x: Tensor) -> Tensor:
        return T.relu(self.conv2(T.relu(self.conv1(x))))


class DecoderOutput:
    """Hidden states plus the two head outputs for one teacher-forced pass."""

    __slots__ = ("hidden", "logits", "projected")

    def __init__(self, hidden: Tensor, logits: Tensor, projected: Tensor):
        self.hidden = hidden
        self.logits = logits
        self.projected = projected


class CornerGuidedTransformer(Module):
    """End-to-end recognizer: dual stems, fused encoder stack, causal decoder."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        cfg = config

        self.img_stem = ConvStem(rng, 3, cfg.d_model)
        if cfg.fusion_mode in AUX_BRANCH_MODES:
            aux_ch = 3 if cfg.fusion_mode == "image_image" else 1
            self.aux_stem = ConvStem(rng, aux_ch, cfg.d_model)
        if cfg.fusion_mode == "concat":
            self.fuse_proj = Linear(rng, 2 * cfg.d_model, cfg.d_model)
        self.enc_blocks = [EncoderBlock(rng, cfg) for _ in range(cfg.n_enc_blocks)]

        self.tok_embed = Tensor(
            _uniform_init(rng, (cfg.vocab_size, cfg.d_model), cfg.d_model),
            requires_grad=True,
        )
        self.dec_blocks = [DecoderBlock(rng, cfg) for _ in range(cfg.n_dec_blocks)]
        self.logit_head = Linear(rng, cfg.d_model, cfg.vocab_size)
        self.proj1 = Linear(rng, cfg.d_model, cfg.proj_hidden)
        self.proj2 = Linear(rng, cfg.proj_hidden, cfg.proj_out)

        self._pos2d = pos_encoding_2d(cfg.feat_h, cfg.feat_w, cfg.d_model)
        self._pos1d = sinusoid_encoding(np.arange(cfg.max_len, dtype=np.float64), cfg.d_model)
        # constant (non-trainable) affine for the stem standardization
        self._unit_gain = Tensor(np.ones(cfg.d_model))
        self._zero_bias = Tensor(np.zeros(cfg.d_model))

    # -- encoder ---------------------------------------------------------------

    def _stem_sequence(self, stem: ConvStem, x: Tensor) -> Tensor:
        bsz = x.shape[0]
        feat = stem(x)  # (B, d, h4, w4)
        cfg = self.config
        seq = feat.reshape(bsz, cfg.d_model, cfg.seq_len).transpose(0, 2, 1)
        # Parameter-free standardization before the positional add: with
        # +-sqrt(1/fan_in) init the raw stem output is an order of magnitude
        # weaker than unit-amplitude sinusoids, which leaves the encoder
        # memory almost content-free and stalls image-to-text binding. The
        # soft eps keeps curvature bounded where flat image regions give the
        # stem rows near-zero channel variance.
        seq = T.layer_norm(seq, self._unit_gain, self._zero_bias, eps=1e-3)
        return seq + self._pos2d

    def encode(self, images, corner_maps=None, capture=None) -> Tensor:
        """Contextualize the image; (B, seq_len, d_model) memory."""
        cfg = self.config
        images = images if isinstance(images, Tensor) else Tensor(images)
        if images.shape[1:] != (3, cfg.image_h, cfg.image_w):
            raise ShapeError(
                f"expected images (B, 3, {cfg.image_h}, {cfg.image_w}), got {images.shape}"
            )
        # Center intensities before the stem: raw [0, 1] pixels put most of
        # the stem's energy into the shared brightness direction.
        images = images * 2.0 - 1.0
        aux = None
        if cfg.fusion_mode in AUX_BRANCH_MODES:
            if cfg.fusion_mode == "image_image":
                aux_in = images
            else:
                if corner_maps is None:
                    raise ShapeError(f"fusion mode {cfg.fusion_mode!r} requires corner maps")
                aux_in = corner_maps if isinstance(corner_maps, Tensor) else Tensor(corner_maps)
                if aux_in.shape != (images.shape[0], 1, cfg.image_h, cfg.image_w):
                    raise ShapeError(
                        f"expected corner maps (B, 1, {cfg.image_h}, {cfg.image_w}), "
                        f"got {aux_in.shape}"
                    )
            aux = self._stem_sequence(self.aux_stem, aux_in)

        x = self._stem_sequence(self.img_stem, images)
        if cfg.fusion_mode == "concat":
            x = self.fuse_proj(T.concat([x, aux], axis=-1))
        elif cfg.fusion_mode == "add":
            x = x + aux
        elif cfg.fusion_mode == "multiply":
            x = x * aux

        # The same corner feature sequence queries every block.
        block_aux = aux if cfg.fusion_mode in ("corner_query", "corner_kv", "image_image") else None
        for i, block in enumerate(self.enc_blocks):
            cap = capture[i] if isinstance(capture, list) else None
            x = block(x, block_aux, capture=cap)
        return x

    # -- decoder ---------------------------------------------------------------

    def decode(self, memory: Tensor, tokens: np.ndarray) -> DecoderOutput:
        """Teacher-forced pass over BOS-shifted tokens of length <= max_len."""
        cfg = self.config
        tokens = np.asarray(tokens)
        if tokens.ndim != 2 or tokens.shape[1] > cfg.max_len:
            raise ShapeError(
                f"tokens must be (B, <= {cfg.max_len}), got {tokens.shape}"
            )
        if tokens.min() < 0 or tokens.max() >= cfg.vocab_size:
            raise DataError(
                f"token ids outside vocabulary [0, {cfg.vocab_size}): "
                f"min {tokens.min()}, max {tokens.max()}"
            )
        m = tokens.shape[1]
        # sqrt(d) scaling keeps token identity comparable to the positional
        # signal; with +-sqrt(1/d) init the raw rows are ~10x weaker.
        x = T.embedding(self.tok_embed, tokens) * math.sqrt(cfg.d_model) + self._pos1d[:m]
        mask = causal_mask(m)
        for block in self.dec_blocks:
            x = block(x, memory, mask)
        logits = self.logit_head(x)
        projected = T.l2_normalize(self.proj2(T.relu(self.proj1(x))), axis=-1)
        return DecoderOutput(hidden=x, logits=logits, projected=projected)

    def forward(self, images, corner_maps, decoder_input) -> DecoderOutput:
        return self.decode(self.encode(images, corner_maps), decoder_input)

    def project_features(self, hidden: Tensor) -> Tensor:
        return T.l2_normalize(self.proj2(T.relu(self.proj1(hidden))), axis=-1)

    # -- inference ---------------------------------------------------------------

    def greedy_decode(self, images, corner_maps, charset: Charset, max_len=None) -> list[str]:
        """Repeated-argmax decoding from BOS until EOS or the length cap."""
        cfg = self.config
        limit = cfg.max_len if max_len is None else min(max_len, cfg.max_len)
        with T.no_grad():
            memory = self.encode(images, corner_maps)
            bsz = memory.shape[0]
            tokens = np.full((bsz, 1), Charset.BOS, dtype=np.int64)
            finished = np.zeros(bsz, dtype=bool)
            outputs = [[] for _ in range(bsz)]
            for step in range(limit):
                logits = self.decode(memory, tokens).logits.data[:, -1, :]
                nxt = logits.argmax(axis=-1)  # argmax ties break to lowest id
                for i in range(bsz):
                    if not finished[i]:
                        if nxt[i] == Charset.EOS:
                            finished[i] = True
                        elif nxt[i] >= 3:
                            outputs[i].append(charset.id_to_char(int(nxt[i])))
                if finished.all() or step + 1 == limit:
                    break
                tokens = np.concatenate([tokens, nxt[:, None]], axis=1)
        return ["".join(chars) for chars in outputs]

    # -- persistence ---------------------------------------------------------------

    def save(self, path) -> None:
        meta = {f"config.{k}": v for k, v in self.config.to_dict().items()}
        T.save_checkpoint(path, self.parameters(), meta)

    def load_parameters(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = set(params) - set(arrays)
        extra = set(arrays) - set(params)
        if missing or extra:
            raise ConfigError(
                f"checkpoint/model parameter mismatch; missing {sorted(missing)[:3]}, "
                f"unexpected {sorted(extra)[:3]}"
            )
        for name, tensor in params.items():
            if tensor.data.shape != arrays[name].shape:
                raise ConfigError(
                    f"shape mismatch for {name}: model {tensor.data.shape}, "
                    f"checkpoint {arrays[name].shape}"
                )
            tensor.data = arrays[name].copy()

    @classmethod
    def from_checkpoint(cls, path) -> "CornerGuidedTransformer":
        arrays, meta = T.load_checkpoint(path)
        cfg = config_from_meta(meta)
        model = cls(cfg, seed=0)
        # Training checkpoints carry optimizer state under the adam.* prefix.
        model.load_parameters({k: v for k, v in arrays.items() if not k.startswith("adam.")})
        return model


def config_from_meta(meta: dict[str, str]) -> ModelConfig:
    raw = {k[len("config.") :]: v for k, v in meta.items() if k.startswith("config.")}
    if not raw:
        raise ConfigError("checkpoint carries no model configuration")
    parsed = {}
    for key, value in raw.items():
        if key == "fusion_mode":
            parsed[key] = value
        else:
            parsed[key] = int(value)
    return ModelConfig.from_dict(parsed)
