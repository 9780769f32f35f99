"""Decoder-only Transformer over the joint source+summary sequence.

One stack both encodes and generates: source positions attend to the whole
source bidirectionally while summary positions attend causally, which is
what the binary attention mask encodes. The output projection shares
storage with the token embedding (structural tying, not a copy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigError, ContractError

# Additive attention bias for forbidden edges. exp(-1e9) underflows to an
# exact 0.0 in float64, so masked positions contribute nothing at all.
MASK_BIAS = -1e9

ARCH_PRESETS = {
    "tiny": dict(num_layers=2, hidden_size=16, num_heads=2, feed_forward_size=32),
    "desk": dict(num_layers=2, hidden_size=64, num_heads=4, feed_forward_size=128),
    "paper": dict(num_layers=12, hidden_size=768, num_heads=12, feed_forward_size=3072),
}


@dataclass
class ModelConfig:
    num_layers: int
    hidden_size: int
    num_heads: int
    vocab_size: int
    max_positions: int
    feed_forward_size: int
    dropout: float = 0.0
    tie_embeddings: bool = True
    init_scale: float = 0.02
    decay_exempt_markers: tuple = ("bias", "_ln_")

    def __post_init__(self):
        if self.hidden_size % self.num_heads != 0:
            raise ConfigError(
                f"hidden_size {self.hidden_size} not divisible by "
                f"num_heads {self.num_heads}"
            )
        if min(self.num_layers, self.vocab_size, self.max_positions) < 1:
            raise ConfigError("model dimensions must be positive")

    @classmethod
    def preset(cls, name: str, vocab_size: int, max_positions: int = 256, **overrides):
        if name not in ARCH_PRESETS:
            raise ConfigError(f"unknown model preset {name!r} (have {sorted(ARCH_PRESETS)})")
        kwargs = dict(ARCH_PRESETS[name])
        kwargs.update(overrides)
        return cls(vocab_size=vocab_size, max_positions=max_positions, **kwargs)


@dataclass
class JointSequence:
    """The concatenated token sequence the model consumes."""

    ids: np.ndarray
    source_len: int
    position_ids: np.ndarray
    segment_ids: np.ndarray

    @classmethod
    def build(cls, ids, source_len: int) -> "JointSequence":
        ids = np.asarray(ids, dtype=np.int64)
        total = len(ids)
        if not 0 < source_len <= total:
            raise ContractError(f"source_len {source_len} invalid for length {total}")
        segments = np.zeros(total, dtype=np.int64)
        segments[source_len:] = 1
        return cls(
            ids=ids,
            source_len=source_len,
            position_ids=np.arange(total, dtype=np.int64),
            segment_ids=segments,
        )

    def __len__(self) -> int:
        return len(self.ids)


def build_attention_mask(source_len: int, total_len: int) -> np.ndarray:
    """Binary (total, total) matrix; row i sees column j iff j <= max(i, source_len).

    Indices in that rule are 1-based; source rows see the whole source,
    summary rows see everything up to and including themselves.
    """
    if not 0 < source_len <= total_len:
        raise ContractError(
            f"source_len {source_len} must be in 1..total_len {total_len}"
        )
    cols = np.arange(total_len)
    row_limit = np.maximum(np.arange(total_len), source_len - 1)
    return (cols[None, :] <= row_limit[:, None]).astype(np.float64)


class PrefixLM:
    """Transformer with per-sequence prefix-bidirectional attention."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.params: dict[str, Parameter] = {}
        rng = np.random.default_rng(seed)
        h, f = config.hidden_size, config.feed_forward_size

        def param(name, shape, init="normal"):
            if init == "normal":
                values = rng.normal(0.0, config.init_scale, size=shape)
            elif init == "zeros":
                values = np.zeros(shape)
            else:
                values = np.ones(shape)
            p = Parameter(values, name=name, decay_exempt=self._exempt(name))
            self.params[name] = p
            return p

        self.tok_emb = param("tok_emb", (config.vocab_size, h))
        self.pos_emb = param("pos_emb", (config.max_positions, h))
        self.seg_emb = param("seg_emb", (2, h))
        param("emb_ln_gain", (h,), "ones")
        param("emb_ln_bias", (h,), "zeros")
        for i in range(config.num_layers):
            for proj in ("q", "k", "v", "out"):
                param(f"layer{i}.attn_{proj}_weight", (h, h))
                param(f"layer{i}.attn_{proj}_bias", (h,), "zeros")
            param(f"layer{i}.attn_ln_gain", (h,), "ones")
            param(f"layer{i}.attn_ln_bias", (h,), "zeros")
            param(f"layer{i}.ff_in_weight", (h, f))
            param(f"layer{i}.ff_in_bias", (f,), "zeros")
            param(f"layer{i}.ff_out_weight", (f, h))
            param(f"layer{i}.ff_out_bias", (h,), "zeros")
            param(f"layer{i}.ff_ln_gain", (h,), "ones")
            param(f"layer{i}.ff_ln_bias", (h,), "zeros")
        if not config.tie_embeddings:
            param("out_emb", (config.vocab_size, h))

    def _exempt(self, name: str) -> bool:
        return any(marker in name for marker in self.config.decay_exempt_markers)

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def num_params(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    # -- forward pieces ----------------------------------------------------

    def embed(self, seq: JointSequence) -> Tensor:
        """Sum of token, position, and segment embedding rows."""
        if len(seq) > self.config.max_positions:
            raise ContractError(
                f"sequence length {len(seq)} exceeds max_positions "
                f"{self.config.max_positions}"
            )
        if seq.ids.size and seq.ids.max() >= self.config.vocab_size:
            raise ContractError("token id out of vocabulary range")
        tok = ad.embedding(self.tok_emb, seq.ids)
        pos = ad.embedding(self.pos_emb, seq.position_ids)
        seg = ad.embedding(self.seg_emb, seq.segment_ids)
        return tok + pos + seg

    def _attention(self, x: Tensor, mask_bias: np.ndarray, i: int, rng) -> Tensor:
        cfg = self.config
        n_heads = cfg.num_heads
        head = cfg.hidden_size // n_heads
        t = x.shape[0]
        p = self.params

        def split_heads(m: Tensor) -> Tensor:
            return ad.transpose(ad.reshape(m, (t, n_heads, head)), (1, 0, 2))

        q = split_heads(x @ p[f"layer{i}.attn_q_weight"] + p[f"layer{i}.attn_q_bias"])
        k = split_heads(x @ p[f"layer{i}.attn_k_weight"] + p[f"layer{i}.attn_k_bias"])
        v = split_heads(x @ p[f"layer{i}.attn_v_weight"] + p[f"layer{i}.attn_v_bias"])
        scores = (q @ ad.transpose(k, (0, 2, 1))) * (1.0 / math.sqrt(head))
        probs = ad.softmax(scores + mask_bias, axis=-1)
        if rng is not None and cfg.dropout > 0.0:
            probs = ad.dropout(probs, cfg.dropout, rng)
        ctx = ad.reshape(ad.transpose(probs @ v, (1, 0, 2)), (t, cfg.hidden_size))
        return ctx @ p[f"layer{i}.attn_out_weight"] + p[f"layer{i}.attn_out_bias"]

    def forward(self, seq: JointSequence, mask: np.ndarray, rng=None) -> Tensor:
        """Contextual states for every position of ``seq`` under ``mask``.

        ``rng`` enables dropout (training); inference passes None.
        """
        t = len(seq)
        if mask.shape != (t, t):
            raise ContractError(f"mask shape {mask.shape} does not match length {t}")
        p = self.params
        mask_bias = (1.0 - mask) * MASK_BIAS  # 0 where allowed, -1e9 where not
        x = ad.layer_norm(self.embed(seq), p["emb_ln_gain"], p["emb_ln_bias"])
        if rng is not None and self.config.dropout > 0.0:
            x = ad.dropout(x, self.config.dropout, rng)
        for i in range(self.config.num_layers):
            attn = self._attention(x, mask_bias, i, rng)
            if rng is not None and self.config.dropout > 0.0:
                attn = ad.dropout(attn, self.config.dropout, rng)
            x = ad.layer_norm(
                x + attn, p[f"layer{i}.attn_ln_gain"], p[f"layer{i}.attn_ln_bias"]
            )
            ff = ad.gelu(x @ p[f"layer{i}.ff_in_weight"] + p[f"layer{i}.ff_in_bias"])
            ff = ff @ p[f"layer{i}.ff_out_weight"] + p[f"layer{i}.ff_out_bias"]
            if rng is not None and self.config.dropout > 0.0:
                ff = ad.dropout(ff, self.config.dropout, rng)
            x = ad.layer_norm(
                x + ff, p[f"layer{i}.ff_ln_gain"], p[f"layer{i}.ff_ln_bias"]
            )
        return x

    def predict_logits(self, states: Tensor) -> Tensor:
        """Vocabulary logits, sharing the embedding matrix when tied."""
        out = self.params["out_emb"] if not self.config.tie_embeddings else self.tok_emb
        return states @ ad.transpose(out, (1, 0))

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        meta = {"schema_version": 1, "model_config": asdict(self.config)}
        meta["model_config"]["decay_exempt_markers"] = list(
            self.config.decay_exempt_markers
        )
        save_checkpoint(path, self.parameters(), meta)

    @classmethod
    def load(cls, path) -> "PrefixLM":
        params, meta = load_checkpoint(path)
        cfg_dict = dict(meta["model_config"])
        cfg_dict["decay_exempt_markers"] = tuple(cfg_dict["decay_exempt_markers"])
        model = cls(ModelConfig(**cfg_dict))
        if set(params) != set(model.params):
            raise ContractError("checkpoint parameter names do not match the model")
        for name, loaded in params.items():
            if loaded.data.shape != model.params[name].data.shape:
                raise ContractError(f"checkpoint shape mismatch for {name!r}")
            model.params[name].data[...] = loaded.data
        return model
