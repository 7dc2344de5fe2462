"""Differentiable primitives.

Every op takes and returns :class:`Tensor`; plain arrays and scalars are
accepted where an operand is a constant. Shapes follow numpy broadcasting
for the elementwise ops.
"""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import ContractError, GatherIndexError, ShapeError
from ..rng import RngStream
from .tensor import Tensor

LAYER_NORM_EPS = 1e-8


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _like(x: Tensor, other) -> Tensor:
    return as_tensor(other, dtype=x.dtype)


def add(a: Tensor, b) -> Tensor:
    b = _like(a, b)
    out_data = a.data + b.data

    def _backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.shape))

    return Tensor(out_data, parents=(a, b), backward_fn=_backward, op="add")


def sub(a: Tensor, b) -> Tensor:
    b = _like(a, b)
    out_data = a.data - b.data

    def _backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g, b.shape))

    return Tensor(out_data, parents=(a, b), backward_fn=_backward, op="sub")


def mul(a: Tensor, b) -> Tensor:
    b = _like(a, b)
    out_data = a.data * b.data

    def _backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.shape))

    return Tensor(out_data, parents=(a, b), backward_fn=_backward, op="mul")


def scale(a: Tensor, s: float) -> Tensor:
    s = a.dtype.type(s)

    def _backward(g):
        a.accumulate(g * s)

    return Tensor(a.data * s, parents=(a,), backward_fn=_backward, op="scale")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; either side may carry a leading batch axis."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    if a.ndim == 3 and b.ndim == 3 and a.shape[0] != b.shape[0]:
        raise ShapeError(f"matmul batch mismatch: {a.shape} @ {b.shape}")
    flat = a.ndim == 3 and b.ndim == 2
    if flat:
        # one GEMM over all rows instead of a stack of small products
        out_data = (a.data.reshape(-1, a.shape[-1]) @ b.data).reshape(a.shape[:-1] + (b.shape[-1],))
    else:
        out_data = np.matmul(a.data, b.data)

    def _backward(g):
        if a.requires_grad:
            if flat:
                ga = (g.reshape(-1, g.shape[-1]) @ b.data.T).reshape(a.shape)
            else:
                ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a.accumulate(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            if flat:
                gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b.accumulate(_unbroadcast(gb, b.shape))

    return Tensor(out_data, parents=(a, b), backward_fn=_backward, op="matmul")


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    if bias.ndim != 1 or bias.shape[0] != x.shape[-1]:
        raise ShapeError(f"bias {bias.shape} does not match last axis of {x.shape}")
    out_data = x.data + bias.data

    def _backward(g):
        if x.requires_grad:
            x.accumulate(g)
        if bias.requires_grad:
            bias.accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0))

    return Tensor(out_data, parents=(x, bias), backward_fn=_backward, op="add_bias")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` with ``weight`` stored as (in, out)."""
    y = matmul(x, weight)
    return add_bias(y, bias) if bias is not None else y


def relu(x: Tensor) -> Tensor:
    keep = x.data > 0
    out_data = np.where(keep, x.data, 0).astype(x.dtype)

    def _backward(g):
        x.accumulate(g * keep)

    return Tensor(out_data, parents=(x,), backward_fn=_backward, op="relu")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # branch-free stable form: exp of a non-positive argument only
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(z.dtype)


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid(x.data)

    def _backward(g):
        x.accumulate(g * s * (1 - s))

    return Tensor(s, parents=(x,), backward_fn=_backward, op="sigmoid")


def log_sigmoid(x: Tensor) -> Tensor:
    """log(sigmoid(x)) = min(x, 0) - log1p(exp(-|x|))."""
    z = x.data
    out_data = np.minimum(z, 0) - np.log1p(np.exp(-np.abs(z)))

    def _backward(g):
        x.accumulate(g * _sigmoid(-z))

    return Tensor(out_data, parents=(x,), backward_fn=_backward, op="log_sigmoid")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalise over the last axis, then apply ``gain * xhat + bias``."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm affine shapes {gain.shape}/{bias.shape} vs feature dim {d}")
    if eps <= 0:
        raise ContractError("layer_norm eps must be positive")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = xhat * gain.data + bias.data

    def _backward(g):
        if gain.requires_grad:
            gain.accumulate((g * xhat).reshape(-1, d).sum(axis=0))
        if bias.requires_grad:
            bias.accumulate(g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gx = g * gain.data
            gx = inv * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
            x.accumulate(gx)

    return Tensor(out_data, parents=(x, gain, bias), backward_fn=_backward, op="layer_norm")


def softmax_rows(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis.

    ``mask`` is boolean and broadcastable to ``x``; True marks entries that
    take part, False entries come out exactly zero.
    """
    z = x.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), z.shape)
        if not mask.any(axis=-1).all():
            raise ContractError("softmax_rows: a row has every entry masked")
        z = np.where(mask, z, -np.inf)
    zmax = z.max(axis=-1, keepdims=True)
    e = np.exp(z - zmax)
    p = e / e.sum(axis=-1, keepdims=True)

    def _backward(g):
        x.accumulate(p * (g - (g * p).sum(axis=-1, keepdims=True)))

    return Tensor(p, parents=(x,), backward_fn=_backward, op="softmax_rows")


def dropout(x: Tensor, rate: float, rng: RngStream | None, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or rate is zero."""
    if not training or rate == 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate {rate} outside [0, 1)")
    if rng is None:
        raise ContractError("training-mode dropout needs an RngStream")
    keep = rng.uniform(x.shape, np.float32) >= rate
    factor = (keep / (1.0 - rate)).astype(x.dtype)
    out_data = x.data * factor

    def _backward(g):
        x.accumulate(g * factor)

    return Tensor(out_data, parents=(x,), backward_fn=_backward, op="dropout")


def embedding_gather(table: Tensor, indices) -> Tensor:
    """Rows of a 2-D table; output shape is ``indices.shape + (d,)``."""
    idx = np.asarray(indices)
    if idx.dtype.kind not in "iu":
        raise GatherIndexError(f"gather indices must be integers, got {idx.dtype}")
    n = table.shape[0]
    if idx.size:
        bad = (idx < 0) | (idx >= n)
        if bad.any():
            raise GatherIndexError(f"gather index {int(idx[bad].flat[0])} outside table of {n} rows")
    if idx.ndim + 1 > 3:
        raise ShapeError("gather indices may have at most two axes")
    out_data = table.data[idx]

    def _backward(g):
        gt = np.zeros_like(table.data)
        kernels.scatter_add_rows(gt, idx.reshape(-1), g.reshape(-1, table.shape[1]))
        table.accumulate(gt)

    return Tensor(out_data, parents=(table,), backward_fn=_backward, op="embedding_gather")


def masked_fill_rows(base: Tensor, rows: Tensor, positions: np.ndarray) -> Tensor:
    """Replace ``base`` rows (flattened over leading axes) at ``positions``.

    Gradient reaches ``base`` only outside ``positions`` and ``rows`` only at
    them, which keeps the two embedding paths isolated.
    """
    d = base.shape[-1]
    positions = np.asarray(positions, dtype=np.int64)
    if rows.shape != (len(positions), d):
        raise ShapeError(f"rows {rows.shape} do not match {len(positions)} positions of width {d}")
    flat = base.data.reshape(-1, d).copy()
    flat[positions] = rows.data
    out_data = flat.reshape(base.shape)

    def _backward(g):
        gf = g.reshape(-1, d)
        if rows.requires_grad:
            rows.accumulate(gf[positions])
        if base.requires_grad:
            gb = gf.copy()
            gb[positions] = 0
            base.accumulate(gb.reshape(base.shape))

    return Tensor(out_data, parents=(base, rows), backward_fn=_backward, op="masked_fill_rows")


def reshape(x: Tensor, shape) -> Tensor:
    def _backward(g):
        x.accumulate(g.reshape(x.shape))

    return Tensor(x.data.reshape(shape), parents=(x,), backward_fn=_backward, op="reshape")


def transpose(x: Tensor, axes=None) -> Tensor:
    axes = tuple(axes) if axes is not None else tuple(reversed(range(x.ndim)))
    inv = tuple(np.argsort(axes))

    def _backward(g):
        x.accumulate(np.transpose(g, inv))

    return Tensor(np.transpose(x.data, axes), parents=(x,), backward_fn=_backward, op="transpose")


def split_heads(x: Tensor, num_heads: int) -> Tensor:
    """(B, T, h*dh) -> (B*h, T, dh)."""
    b, t, d = x.shape
    dh = d // num_heads
    out_data = x.data.reshape(b, t, num_heads, dh).transpose(0, 2, 1, 3).reshape(b * num_heads, t, dh)

    def _backward(g):
        x.accumulate(g.reshape(b, num_heads, t, dh).transpose(0, 2, 1, 3).reshape(b, t, d))

    return Tensor(out_data, parents=(x,), backward_fn=_backward, op="split_heads")


def merge_heads(x: Tensor, num_heads: int) -> Tensor:
    """(B*h, T, dh) -> (B, T, h*dh)."""
    bh, t, dh = x.shape
    b = bh // num_heads
    out_data = x.data.reshape(b, num_heads, t, dh).transpose(0, 2, 1, 3).reshape(b, t, num_heads * dh)

    def _backward(g):
        x.accumulate(g.reshape(b, t, num_heads, dh).transpose(0, 2, 1, 3).reshape(bh, t, dh))

    return Tensor(out_data, parents=(x,), backward_fn=_backward, op="merge_heads")


def select_last(x: Tensor) -> Tensor:
    """(B, T, d) -> (B, d): the final position of every sequence."""

    def _backward(g):
        gx = np.zeros_like(x.data)
        gx[:, -1, :] = g
        x.accumulate(gx)

    return Tensor(x.data[:, -1, :], parents=(x,), backward_fn=_backward, op="select_last")


def sum_all(x: Tensor) -> Tensor:
    def _backward(g):
        x.accumulate(np.broadcast_to(g, x.shape))

    return Tensor(x.data.sum(), parents=(x,), backward_fn=_backward, op="sum")


def sum_last(x: Tensor) -> Tensor:
    def _backward(g):
        x.accumulate(np.broadcast_to(g[..., None], x.shape))

    return Tensor(x.data.sum(axis=-1), parents=(x,), backward_fn=_backward, op="sum_last")


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size

    def _backward(g):
        x.accumulate(np.broadcast_to(g / n, x.shape))

    return Tensor(x.data.mean(), parents=(x,), backward_fn=_backward, op="mean")
