"""Encoder-decoder transformer on plain numpy arrays.

Sinusoidal positions, padding/look-ahead masking, multi-head scaled-dot
attention, post-norm residual blocks, and greedy decoding. The forward pass
can record every intermediate needed for the manual backward pass used by the
trainer, so the whole model trains without an autograd framework. float64
everywhere; determinism comes from seeding alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tokenizer import END_ID, PAD_ID, START_ID, TokenSequence


class OddDimensionError(ValueError):
    """Positional encodings need an even model dimension."""


class ShapeMismatchError(ValueError):
    """Attention operands or mask have incompatible shapes."""


class SequenceTooLongError(ValueError):
    """Sequence exceeds the configured number of positions."""


@dataclass(frozen=True)
class ModelConfig:
    src_vocab: int
    tgt_vocab: int
    num_layers: int = 4
    d_model: int = 128
    num_heads: int = 8
    d_ff: int = 0  # 0 means 4 * d_model
    dropout_rate: float = 0.1
    max_positions: int = 2048
    seed: int = 0

    def __post_init__(self) -> None:
        if self.d_ff == 0:
            object.__setattr__(self, "d_ff", 4 * self.d_model)
        if self.d_model % self.num_heads:
            raise ValueError("d_model must be divisible by num_heads")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "src_vocab": self.src_vocab,
            "tgt_vocab": self.tgt_vocab,
            "num_layers": self.num_layers,
            "d_model": self.d_model,
            "num_heads": self.num_heads,
            "d_ff": self.d_ff,
            "dropout_rate": self.dropout_rate,
            "max_positions": self.max_positions,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


Parameters = dict[str, np.ndarray]


def positional_encoding(max_positions: int, d_model: int) -> np.ndarray:
    """Sinusoidal position matrix: even columns sin, odd columns cos, sharing
    the exponent 2i/d_model. Every entry lies in [-1, 1]."""
    if d_model % 2:
        raise OddDimensionError(f"d_model must be even, got {d_model}")
    positions = np.arange(max_positions, dtype=np.float64)[:, None]
    exponents = np.arange(d_model // 2, dtype=np.float64)[None, :] * 2.0 / d_model
    angles = positions / np.power(10000.0, exponents)
    table = np.zeros((max_positions, d_model), dtype=np.float64)
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return table


@dataclass
class MaskSet:
    """Boolean masks, True = position excluded from attention."""

    src_padding: np.ndarray  # [batch, src_len]
    tgt_combined: np.ndarray  # [batch, tgt_len, tgt_len]


def make_masks(src_ids: np.ndarray, tgt_ids: np.ndarray, pad_id: int = PAD_ID) -> MaskSet:
    src_ids = np.asarray(src_ids)
    tgt_ids = np.asarray(tgt_ids)
    src_padding = src_ids == pad_id
    tgt_len = tgt_ids.shape[1]
    look_ahead = np.triu(np.ones((tgt_len, tgt_len), dtype=bool), k=1)
    tgt_combined = (tgt_ids == pad_id)[:, None, :] | look_ahead[None, :, :]
    return MaskSet(src_padding=src_padding, tgt_combined=tgt_combined)


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


_MASK_FILL = -1e9


def attention(
    q: np.ndarray, k: np.ndarray, v: np.ndarray, mask: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Scaled dot-product attention.

    Returns (weights @ v, weights) where weights = softmax(q kᵀ / sqrt(d_k))
    with masked entries forced to (numerical) -inf. Rows with at least one
    unmasked entry sum to 1.
    """
    q, k, v = np.asarray(q), np.asarray(k), np.asarray(v)
    if q.shape[-1] != k.shape[-1]:
        raise ShapeMismatchError(f"key dims differ: {q.shape[-1]} vs {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeMismatchError(f"key/value counts differ: {k.shape[-2]} vs {v.shape[-2]}")
    scores = q @ np.swapaxes(k, -1, -2) / math.sqrt(q.shape[-1])
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        try:
            scores = np.where(mask, _MASK_FILL, scores)
        except ValueError as err:
            raise ShapeMismatchError(f"mask not broadcastable to {scores.shape}") from err
    weights = _softmax(scores)
    return weights @ v, weights


# --- Parameter set --------------------------------------------------------


def _layer_prefixes(config: ModelConfig) -> list[tuple[str, str]]:
    blocks = []
    for i in range(config.num_layers):
        blocks.append((f"enc{i}", "attn"))
        blocks.append((f"enc{i}", "ff"))
    for i in range(config.num_layers):
        blocks.append((f"dec{i}", "self"))
        blocks.append((f"dec{i}", "cross"))
        blocks.append((f"dec{i}", "ff"))
    return blocks


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Name -> shape map; the single source of truth for layout, checkpoint
    validation, and parameter counting."""
    d, f = config.d_model, config.d_ff
    shapes: dict[str, tuple[int, ...]] = {
        "src_embed": (config.src_vocab, d),
        "tgt_embed": (config.tgt_vocab, d),
    }
    for block, sub in _layer_prefixes(config):
        prefix = f"{block}.{sub}"
        if sub == "ff":
            shapes[f"{prefix}.w1"] = (d, f)
            shapes[f"{prefix}.b1"] = (f,)
            shapes[f"{prefix}.w2"] = (f, d)
            shapes[f"{prefix}.b2"] = (d,)
        else:
            for name in ("wq", "wk", "wv", "wo"):
                shapes[f"{prefix}.{name}"] = (d, d)
        shapes[f"{prefix}.ln.g"] = (d,)
        shapes[f"{prefix}.ln.b"] = (d,)
    shapes["out.w"] = (d, config.tgt_vocab)
    shapes["out.b"] = (config.tgt_vocab,)
    return shapes


def param_count(config: ModelConfig) -> int:
    return sum(int(np.prod(shape)) for shape in param_shapes(config).values())


def init_params(config: ModelConfig) -> Parameters:
    """Seeded Xavier-uniform weights; layer-norm gains 1, biases 0."""
    rng = np.random.default_rng(config.seed)
    params: Parameters = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".ln.g"):
            params[name] = np.ones(shape)
        elif name.endswith((".b", ".b1", ".b2")) or name.endswith(".ln.b"):
            params[name] = np.zeros(shape)
        elif len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            limit = math.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
    return params


def validate_params(params: Parameters, config: ModelConfig) -> None:
    shapes = param_shapes(config)
    missing = sorted(set(shapes) - set(params))
    extra = sorted(set(params) - set(shapes))
    if missing or extra:
        raise ShapeMismatchError(f"parameter names mismatch: missing={missing} extra={extra}")
    for name, shape in shapes.items():
        if tuple(params[name].shape) != shape:
            raise ShapeMismatchError(
                f"{name}: expected shape {shape}, got {tuple(params[name].shape)}"
            )
        if not np.all(np.isfinite(params[name])):
            raise ValueError(f"{name}: non-finite values")


# --- Forward pass with cache ----------------------------------------------


def _split_heads(x: np.ndarray, num_heads: int) -> np.ndarray:
    b, length, d = x.shape
    return x.reshape(b, length, num_heads, d // num_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, length, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, length, h * dh)


def _dropout_mask(shape, rate: float, rng: np.random.Generator | None):
    if rate <= 0.0 or rng is None:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _mha_forward(params, prefix, x_q, x_kv, mask, num_heads):
    q = x_q @ params[f"{prefix}.wq"]
    k = x_kv @ params[f"{prefix}.wk"]
    v = x_kv @ params[f"{prefix}.wv"]
    qh, kh, vh = (_split_heads(t, num_heads) for t in (q, k, v))
    ctx_h, weights = attention(qh, kh, vh, mask)
    ctx = _merge_heads(ctx_h)
    out = ctx @ params[f"{prefix}.wo"]
    cache = {"x_q": x_q, "x_kv": x_kv, "qh": qh, "kh": kh, "vh": vh, "attn": weights, "ctx": ctx}
    return out, cache


def _mha_backward(dout, cache, params, grads, prefix):
    x_q, x_kv = cache["x_q"], cache["x_kv"]
    qh, kh, vh, attn, ctx = cache["qh"], cache["kh"], cache["vh"], cache["attn"], cache["ctx"]
    d = dout.shape[-1]
    dh = qh.shape[-1]

    grads[f"{prefix}.wo"] += ctx.reshape(-1, d).T @ dout.reshape(-1, d)
    dctx = dout @ params[f"{prefix}.wo"].T
    dctx_h = _split_heads(dctx, attn.shape[1])

    dattn = dctx_h @ np.swapaxes(vh, -1, -2)
    dvh = np.swapaxes(attn, -1, -2) @ dctx_h
    dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
    dscores /= math.sqrt(dh)
    dqh = dscores @ kh
    dkh = np.swapaxes(dscores, -1, -2) @ qh

    dq, dk, dv = (_merge_heads(t) for t in (dqh, dkh, dvh))
    grads[f"{prefix}.wq"] += x_q.reshape(-1, d).T @ dq.reshape(-1, d)
    grads[f"{prefix}.wk"] += x_kv.reshape(-1, d).T @ dk.reshape(-1, d)
    grads[f"{prefix}.wv"] += x_kv.reshape(-1, d).T @ dv.reshape(-1, d)
    dx_q = dq @ params[f"{prefix}.wq"].T
    dx_kv = dk @ params[f"{prefix}.wk"].T + dv @ params[f"{prefix}.wv"].T
    return dx_q, dx_kv


def _ffn_forward(params, prefix, x):
    pre = x @ params[f"{prefix}.w1"] + params[f"{prefix}.b1"]
    hidden = np.maximum(pre, 0.0)
    out = hidden @ params[f"{prefix}.w2"] + params[f"{prefix}.b2"]
    return out, {"x": x, "pre": pre, "hidden": hidden}


def _ffn_backward(dout, cache, params, grads, prefix):
    x, pre, hidden = cache["x"], cache["pre"], cache["hidden"]
    f = hidden.shape[-1]
    d = x.shape[-1]
    grads[f"{prefix}.w2"] += hidden.reshape(-1, f).T @ dout.reshape(-1, d)
    grads[f"{prefix}.b2"] += dout.reshape(-1, d).sum(axis=0)
    dhidden = dout @ params[f"{prefix}.w2"].T
    dpre = dhidden * (pre > 0.0)
    grads[f"{prefix}.w1"] += x.reshape(-1, d).T @ dpre.reshape(-1, f)
    grads[f"{prefix}.b1"] += dpre.reshape(-1, f).sum(axis=0)
    return dpre @ params[f"{prefix}.w1"].T


_LN_EPS = 1e-6


def _residual_ln_forward(params, prefix, x, sub_out, rate, rng):
    drop = _dropout_mask(sub_out.shape, rate, rng)
    summed = x + (sub_out if drop is None else sub_out * drop)
    mean = summed.mean(axis=-1, keepdims=True)
    centered = summed - mean
    inv = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + _LN_EPS)
    xhat = centered * inv
    out = xhat * params[f"{prefix}.ln.g"] + params[f"{prefix}.ln.b"]
    return out, {"xhat": xhat, "inv": inv, "drop": drop}


def _residual_ln_backward(dout, cache, params, grads, prefix):
    """Returns (d_residual_input, d_sublayer_output)."""
    xhat, inv, drop = cache["xhat"], cache["inv"], cache["drop"]
    d = dout.shape[-1]
    grads[f"{prefix}.ln.g"] += (dout * xhat).reshape(-1, d).sum(axis=0)
    grads[f"{prefix}.ln.b"] += dout.reshape(-1, d).sum(axis=0)
    dxhat = dout * params[f"{prefix}.ln.g"]
    dsummed = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    dsub = dsummed if drop is None else dsummed * drop
    return dsummed, dsub


def _embed_forward(params, name, ids, d_model, rate, rng):
    scale = math.sqrt(d_model)
    table = positional_encoding(ids.shape[1], d_model)
    x = params[name][ids] * scale + table[None, :, :]
    drop = _dropout_mask(x.shape, rate, rng)
    if drop is not None:
        x = x * drop
    return x, {"ids": ids, "drop": drop, "scale": scale}


def _embed_backward(dx, cache, grads, name):
    if cache["drop"] is not None:
        dx = dx * cache["drop"]
    grad = grads[name]
    np.add.at(grad, cache["ids"], dx * cache["scale"])


def _check_lengths(config: ModelConfig, *lengths: int) -> None:
    for length in lengths:
        if length > config.max_positions:
            raise SequenceTooLongError(
                f"sequence length {length} exceeds max positions {config.max_positions}"
            )


def encode_source(params, config, src_ids, training=False, rng=None, cache=None):
    """Run the encoder stack; returns (memory, src_key_mask)."""
    src_ids = np.asarray(src_ids)
    _check_lengths(config, src_ids.shape[1])
    rate = config.dropout_rate if training else 0.0
    src_key_mask = (src_ids == PAD_ID)[:, None, None, :]  # [B,1,1,Ls]
    x, emb_cache = _embed_forward(params, "src_embed", src_ids, config.d_model, rate, rng)
    layer_caches = []
    for i in range(config.num_layers):
        attn_out, attn_cache = _mha_forward(params, f"enc{i}.attn", x, x, src_key_mask, config.num_heads)
        x, ln1_cache = _residual_ln_forward(params, f"enc{i}.attn", x, attn_out, rate, rng)
        ff_out, ff_cache = _ffn_forward(params, f"enc{i}.ff", x)
        x, ln2_cache = _residual_ln_forward(params, f"enc{i}.ff", x, ff_out, rate, rng)
        layer_caches.append((attn_cache, ln1_cache, ff_cache, ln2_cache))
    if cache is not None:
        cache["src_emb"] = emb_cache
        cache["enc_layers"] = layer_caches
    return x, src_key_mask


def decode_target(params, config, memory, src_key_mask, tgt_in_ids, training=False, rng=None, cache=None):
    """Run the decoder stack over a (possibly partial) target prefix."""
    tgt_in_ids = np.asarray(tgt_in_ids)
    _check_lengths(config, tgt_in_ids.shape[1])
    rate = config.dropout_rate if training else 0.0
    tgt_len = tgt_in_ids.shape[1]
    look_ahead = np.triu(np.ones((tgt_len, tgt_len), dtype=bool), k=1)
    self_mask = ((tgt_in_ids == PAD_ID)[:, None, :] | look_ahead[None, :, :])[:, None, :, :]
    y, emb_cache = _embed_forward(params, "tgt_embed", tgt_in_ids, config.d_model, rate, rng)
    layer_caches = []
    for i in range(config.num_layers):
        sa_out, sa_cache = _mha_forward(params, f"dec{i}.self", y, y, self_mask, config.num_heads)
        y, ln1_cache = _residual_ln_forward(params, f"dec{i}.self", y, sa_out, rate, rng)
        ca_out, ca_cache = _mha_forward(params, f"dec{i}.cross", y, memory, src_key_mask, config.num_heads)
        y, ln2_cache = _residual_ln_forward(params, f"dec{i}.cross", y, ca_out, rate, rng)
        ff_out, ff_cache = _ffn_forward(params, f"dec{i}.ff", y)
        y, ln3_cache = _residual_ln_forward(params, f"dec{i}.ff", y, ff_out, rate, rng)
        layer_caches.append((sa_cache, ln1_cache, ca_cache, ln2_cache, ff_cache, ln3_cache))
    logits = y @ params["out.w"] + params["out.b"]
    if cache is not None:
        cache["tgt_emb"] = emb_cache
        cache["dec_layers"] = layer_caches
        cache["dec_final"] = y
    return logits


def forward_with_cache(params, config, src_ids, tgt_in_ids, training=False, rng=None):
    """Full forward pass returning (logits, cache) for the backward pass."""
    if training and config.dropout_rate > 0.0 and rng is None:
        rng = np.random.default_rng(config.seed)
    cache: dict = {"config": config}
    memory, src_key_mask = encode_source(params, config, src_ids, training, rng, cache)
    cache["memory"] = memory
    logits = decode_target(params, config, memory, src_key_mask, np.asarray(tgt_in_ids), training, rng, cache)
    return logits, cache


def forward(params, config, src_ids, tgt_in_ids, training=False, rng=None):
    """Teacher-forced logits of shape [batch, tgt_len, tgt_vocab]."""
    logits, _ = forward_with_cache(params, config, src_ids, tgt_in_ids, training, rng)
    return logits


def backward_from_cache(params: Parameters, cache: dict, dlogits: np.ndarray) -> Parameters:
    """Gradients of a scalar loss w.r.t. every parameter, given dL/dlogits."""
    config: ModelConfig = cache["config"]
    grads: Parameters = {name: np.zeros_like(value) for name, value in params.items()}

    y = cache["dec_final"]
    d = config.d_model
    grads["out.w"] += y.reshape(-1, d).T @ dlogits.reshape(-1, dlogits.shape[-1])
    grads["out.b"] += dlogits.reshape(-1, dlogits.shape[-1]).sum(axis=0)
    dy = dlogits @ params["out.w"].T

    d_memory = np.zeros_like(cache["memory"])
    for i in reversed(range(config.num_layers)):
        sa_cache, ln1_cache, ca_cache, ln2_cache, ff_cache, ln3_cache = cache["dec_layers"][i]
        dy, dff = _residual_ln_backward(dy, ln3_cache, params, grads, f"dec{i}.ff")
        dy += _ffn_backward(dff, ff_cache, params, grads, f"dec{i}.ff")
        dy, dca = _residual_ln_backward(dy, ln2_cache, params, grads, f"dec{i}.cross")
        dq, dkv = _mha_backward(dca, ca_cache, params, grads, f"dec{i}.cross")
        dy += dq
        d_memory += dkv
        dy, dsa = _residual_ln_backward(dy, ln1_cache, params, grads, f"dec{i}.self")
        dq, dkv = _mha_backward(dsa, sa_cache, params, grads, f"dec{i}.self")
        dy += dq + dkv
    _embed_backward(dy, cache["tgt_emb"], grads, "tgt_embed")

    dx = d_memory
    for i in reversed(range(config.num_layers)):
        attn_cache, ln1_cache, ff_cache, ln2_cache = cache["enc_layers"][i]
        dx, dff = _residual_ln_backward(dx, ln2_cache, params, grads, f"enc{i}.ff")
        dx += _ffn_backward(dff, ff_cache, params, grads, f"enc{i}.ff")
        dx, dattn = _residual_ln_backward(dx, ln1_cache, params, grads, f"enc{i}.attn")
        dq, dkv = _mha_backward(dattn, attn_cache, params, grads, f"enc{i}.attn")
        dx += dq + dkv
    _embed_backward(dx, cache["src_emb"], grads, "src_embed")
    return grads


def greedy_decode(
    params: Parameters,
    config: ModelConfig,
    src: TokenSequence | Sequence[int],
    max_len: int,
) -> TokenSequence:
    """Argmax decoding from START; stops at END or after max_len tokens."""
    ids = tuple(src.ids if isinstance(src, TokenSequence) else src)
    _check_lengths(config, len(ids), max_len + 1)
    src_arr = np.asarray([ids])
    memory, src_key_mask = encode_source(params, config, src_arr, training=False)
    out = [START_ID]
    for _ in range(max_len):
        logits = decode_target(params, config, memory, src_key_mask, np.asarray([out]))
        next_id = int(np.argmax(logits[0, -1]))
        out.append(next_id)
        if next_id == END_ID:
            break
    return TokenSequence(ids=tuple(out), side="target")
