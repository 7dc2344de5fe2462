"""Causal self-attention block in the original SASRec layout.

    Q   = LN1(H)
    H'  = Q + Dropout(MHA(Q, H, H))
    H'' = LN2(H')
    out = (H'' + Dropout(FFN(H''))) * timeline
"""
from __future__ import annotations

import math

import numpy as np

from ..numerics import Parameter, Tensor, ops
from ..rng import RngStream


def _xavier(rng: RngStream, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return ((rng.uniform((fan_in, fan_out)) * 2 - 1) * bound).astype(dtype)


class TransformerBlockParams:
    """Weights of one block; matrices are stored (in, out)."""

    NAMES = ("ln1.gain", "ln1.bias", "Wq", "bq", "Wk", "bk", "Wv", "bv", "Wo", "bo",
             "ln2.gain", "ln2.bias", "W1", "b1", "W2", "b2")

    def __init__(self, d: int, num_heads: int, rng: RngStream, dtype=np.float32, prefix: str = "block"):
        self.d = d
        self.num_heads = num_heads
        zeros = lambda: np.zeros(d, dtype=dtype)  # noqa: E731
        values = {
            "ln1.gain": np.ones(d, dtype=dtype), "ln1.bias": zeros(),
            "Wq": _xavier(rng, d, d, dtype), "bq": zeros(),
            "Wk": _xavier(rng, d, d, dtype), "bk": zeros(),
            "Wv": _xavier(rng, d, d, dtype), "bv": zeros(),
            "Wo": _xavier(rng, d, d, dtype), "bo": zeros(),
            "ln2.gain": np.ones(d, dtype=dtype), "ln2.bias": zeros(),
            "W1": _xavier(rng, d, d, dtype), "b1": zeros(),
            "W2": _xavier(rng, d, d, dtype), "b2": zeros(),
        }
        self.params = {k: Parameter(v, name=f"{prefix}.{k}") for k, v in values.items()}

    def __getitem__(self, key: str) -> Parameter:
        return self.params[key]

    def parameters(self) -> list[Parameter]:
        return [self.params[k] for k in self.NAMES]


def attention_mask(tokens: np.ndarray, num_heads: int) -> np.ndarray:
    """Boolean (B*h, T, T): causal, padding keys hidden, diagonal always open.

    Keeping the diagonal open gives padding queries one entry to attend to;
    their outputs are zeroed by the timeline mask afterwards.
    """
    b, t = tokens.shape
    causal = np.tril(np.ones((t, t), dtype=bool))
    real_key = (tokens >= 0)[:, None, :]
    allowed = (causal[None] & real_key) | np.eye(t, dtype=bool)[None]
    return np.repeat(allowed, num_heads, axis=0)


def transformer_block_forward(H: Tensor, params: TransformerBlockParams, mask: np.ndarray,
                              timeline: np.ndarray, dropout_rate: float = 0.0,
                              rng: RngStream | None = None, training: bool = False) -> Tensor:
    """One block over ``H`` of shape (B, T, d)."""
    p = params
    h = p.num_heads
    dh = p.d // h
    Q = ops.layer_norm(H, p["ln1.gain"], p["ln1.bias"])
    q = ops.split_heads(ops.linear(Q, p["Wq"], p["bq"]), h)
    k = ops.split_heads(ops.linear(H, p["Wk"], p["bk"]), h)
    v = ops.split_heads(ops.linear(H, p["Wv"], p["bv"]), h)
    logits = ops.scale(ops.matmul(q, ops.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(dh))
    weights = ops.softmax_rows(logits, mask)
    attn = ops.merge_heads(ops.matmul(weights, v), h)
    attn = ops.dropout(ops.linear(attn, p["Wo"], p["bo"]), dropout_rate, rng, training)
    H1 = ops.add(Q, attn)
    H2 = ops.layer_norm(H1, p["ln2.gain"], p["ln2.bias"])
    ff = ops.dropout(ops.relu(ops.linear(H2, p["W1"], p["b1"])), dropout_rate, rng, training)
    ff = ops.dropout(ops.linear(ff, p["W2"], p["b2"]), dropout_rate, rng, training)
    out = ops.add(H2, ff)
    return ops.mul(out, timeline)
