"""SASRec backbone with dual-path input embeddings."""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from ..errors import ContractError, ShapeError
from ..numerics import Parameter, Tensor, ops
from ..rng import RngStream
from .config import ModelConfig
from .embedding import PAD, IdEmbeddingTable, ProjectionLayer, resolve_embeddings, truncated_normal
from .transformer import TransformerBlockParams, attention_mask, transformer_block_forward

log = logging.getLogger(__name__)


def pad_batch(sequences: Sequence[Sequence[int]], max_len: int, full: bool = False) -> np.ndarray:
    """Left-pad (and left-truncate) index sequences into a (B, T) token array.

    ``T`` is the longest kept sequence, or ``max_len`` when ``full``. Real
    items always end at column ``T - 1``; positional rows are aligned to the
    right so cropping never changes which position an item sees.
    """
    if any(len(s) == 0 for s in sequences):
        raise ContractError("cannot encode an empty sequence")
    width = max_len if full else min(max_len, max((len(s) for s in sequences), default=1))
    out = np.full((len(sequences), width), PAD, dtype=np.int64)
    for r, seq in enumerate(sequences):
        tail = list(seq)[-width:]
        out[r, width - len(tail):] = tail
    return out


class DenseRecModel:
    """All trainable state: ID table, positions, blocks, final norm, projection.

    ``projection`` is None for the ID-only baseline. Content vectors are data,
    not parameters, and are attached with :meth:`attach_content`.
    """

    def __init__(self, config: ModelConfig, n_known: int, seed: int = 0, with_projection: bool = True):
        self.config = config
        self.n_known = n_known
        dtype = config.dtype
        root = RngStream(seed, "init")
        self.ids = IdEmbeddingTable(n_known, config.d, root.spawn("item_emb"), config.init_std, dtype)
        self.pos_emb = Parameter(truncated_normal(root.spawn("pos_emb"), (config.max_len, config.d), config.init_std, dtype),
                                 name="pos_emb")
        self.blocks = [TransformerBlockParams(config.d, config.num_heads, root.spawn(f"block{i}"), dtype, prefix=f"blocks.{i}")
                       for i in range(config.num_blocks)]
        self.final_gain = Parameter(np.ones(config.d, dtype=dtype), name="final_ln.gain")
        self.final_bias = Parameter(np.zeros(config.d, dtype=dtype), name="final_ln.bias")
        self.projection = (ProjectionLayer(config.d, config.d_c, root.spawn("proj"), config.init_std, dtype)
                           if with_projection else None)
        self.content_matrix: np.ndarray | None = None
        self.content_mask: np.ndarray | None = None

    @property
    def mode(self) -> str:
        return "denserec" if self.projection is not None else "id_only"

    def named_parameters(self) -> list[tuple[str, Parameter]]:
        params = [self.ids.table, self.pos_emb]
        for block in self.blocks:
            params.extend(block.parameters())
        params += [self.final_gain, self.final_bias]
        if self.projection is not None:
            params += self.projection.parameters()
        return [(p.name, p) for p in params]

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def attach_content(self, store) -> None:
        if store is None:
            self.content_matrix = self.content_mask = None
            return
        if self.projection is not None and store.d_c != self.config.d_c:
            raise ShapeError(f"content width {store.d_c} does not match model d_c={self.config.d_c}")
        self.content_matrix = store.matrix.astype(self.config.dtype)
        self.content_mask = store.mask.copy()

    def has_content(self, items: np.ndarray) -> np.ndarray:
        items = np.asarray(items)
        if self.content_mask is None:
            return np.zeros(items.shape, dtype=bool)
        safe = np.where(items >= 0, items, 0)
        ok = items >= 0
        ok &= safe < len(self.content_mask)
        return ok & self.content_mask[np.minimum(safe, len(self.content_mask) - 1)]

    def embed(self, items, z) -> Tensor:
        return resolve_embeddings(items, z, self.ids, self.content_matrix, self.content_mask, self.projection)

    def encode(self, tokens: np.ndarray, z: np.ndarray | None = None, training: bool = False,
               rng: RngStream | None = None, return_all: bool = False) -> Tensor:
        """Representations at the last position, (B, d); (B, T, d) if ``return_all``."""
        cfg = self.config
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.ndim != 2 or tokens.shape[1] > cfg.max_len:
            raise ShapeError(f"token batch must be (B, T<= {cfg.max_len}), got {tokens.shape}")
        if not (tokens[:, -1] >= 0).all():
            raise ContractError("every sequence needs a real item in its last position")
        if z is None:
            z = np.zeros(tokens.shape, dtype=bool)
        drop = cfg.dropout_rate if training else 0.0
        x = self.embed(tokens, z)
        t = tokens.shape[1]
        if cfg.use_positional:
            pos = ops.embedding_gather(self.pos_emb, np.arange(cfg.max_len - t, cfg.max_len))
            x = ops.add(x, pos)
        x = ops.dropout(x, drop, rng, training)
        timeline = (tokens >= 0)[:, :, None].astype(cfg.dtype)
        x = ops.mul(x, timeline)
        mask = attention_mask(tokens, cfg.num_heads)
        for block in self.blocks:
            x = transformer_block_forward(x, block, mask, timeline, drop, rng, training)
        x = ops.layer_norm(x, self.final_gain, self.final_bias)
        return x if return_all else ops.select_last(x)

    def encode_sequence(self, items: Sequence[int], z=None, training: bool = False,
                        rng: RngStream | None = None) -> np.ndarray:
        """Encode one sequence (left-truncated to max_len) and return h_n as (d,)."""
        if len(items) == 0:
            raise ContractError("cannot encode an empty sequence")
        tokens = pad_batch([items], self.config.max_len, full=True)
        zz = np.zeros(tokens.shape, dtype=bool)
        if z is not None:
            tail = np.asarray(z, dtype=bool)[-tokens.shape[1]:]
            zz[0, tokens.shape[1] - len(tail):] = tail
        return self.encode(tokens, zz, training, rng).data[0]

    def rezero_padding(self) -> None:
        self.ids.rezero_padding()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, values: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = set(params) - set(values)
        if missing:
            raise ShapeError(f"checkpoint lacks parameters: {sorted(missing)}")
        for name, p in params.items():
            arr = np.asarray(values[name])
            if arr.shape != p.shape:
                raise ShapeError(f"parameter {name}: checkpoint shape {arr.shape} vs model {p.shape}")
            p.data[...] = arr.astype(p.dtype)


def score_items(h_n, item_embeddings) -> np.ndarray:
    """Dot-product scores of one (d,) or many (B, d) representations."""
    h = np.asarray(h_n.data if isinstance(h_n, Tensor) else h_n)
    e = np.asarray(item_embeddings.data if isinstance(item_embeddings, Tensor) else item_embeddings)
    if h.shape[-1] != e.shape[-1]:
        raise ShapeError(f"representation width {h.shape[-1]} vs item embedding width {e.shape[-1]}")
    return h @ e.T
