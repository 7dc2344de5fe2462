"""The two embedding paths and the per-position path choice."""
from __future__ import annotations

import numpy as np

from ..errors import ContractError, MissingContentError, ShapeError, VocabularyError
from ..numerics import Parameter, Tensor, ops
from ..rng import RngStream

PAD = -1


def truncated_normal(rng: RngStream, shape, std: float, dtype) -> np.ndarray:
    """Normal(0, std) redrawn outside two standard deviations."""
    out = rng.normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return (out * std).astype(dtype)


class IdEmbeddingTable:
    """Learned rows for training-vocabulary items; row 0 is the zero padding row.

    Item index ``i`` (``0 <= i < n_known``) lives in row ``i + 1``.
    """

    def __init__(self, n_known: int, d: int, rng: RngStream, std: float = 0.02, dtype=np.float32):
        data = truncated_normal(rng, (n_known + 1, d), std, dtype)
        data[0] = 0
        self.table = Parameter(data, name="item_emb")
        self.n_known = n_known

    @property
    def d(self) -> int:
        return self.table.shape[1]

    def rows_for(self, items: np.ndarray) -> np.ndarray:
        items = np.asarray(items)
        if np.any(items >= self.n_known):
            bad = int(items[items >= self.n_known].flat[0])
            raise VocabularyError(f"item index {bad} is not in the training vocabulary")
        return np.where(items < 0, 0, items + 1)

    def rezero_padding(self) -> None:
        self.table.data[0] = 0

    def lookup(self, item: int) -> np.ndarray:
        return self.table.data[self.rows_for(np.array([item]))[0]]


class ProjectionLayer:
    """Linear map from content space to the ID embedding space: ``W_p c + b_p``."""

    def __init__(self, d: int, d_c: int, rng: RngStream, std: float = 0.02, dtype=np.float32):
        self.W = Parameter(truncated_normal(rng, (d, d_c), std, dtype), name="proj.W")
        self.b = Parameter(np.zeros(d, dtype=dtype), name="proj.b")

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def d_c(self) -> int:
        return self.W.shape[1]

    def parameters(self) -> list[Parameter]:
        return [self.W, self.b]


def project_content(c, proj: ProjectionLayer) -> Tensor:
    """Project one vector (d_c,) or a stack (m, d_c) into the ID space."""
    c = ops.as_tensor(c, dtype=proj.W.dtype)
    if c.shape[-1] != proj.d_c:
        raise ShapeError(f"content vector width {c.shape[-1]} does not match d_c={proj.d_c}")
    single = c.ndim == 1
    if single:
        c = ops.reshape(c, (1, proj.d_c))
    out = ops.add_bias(ops.matmul(c, ops.transpose(proj.W)), proj.b)
    return ops.reshape(out, (proj.d,)) if single else out


def sample_path_mask(length, p_dense: float, rng: RngStream) -> np.ndarray:
    """Independent Bernoulli(p_dense) draws, True selecting the dense path."""
    if not 0.0 <= p_dense <= 1.0:
        raise ContractError(f"p_dense {p_dense} outside [0, 1]")
    return rng.bernoulli(p_dense, length)


def resolve_embeddings(items, z, ids: IdEmbeddingTable, content_matrix: np.ndarray | None,
                       content_mask: np.ndarray | None, proj: ProjectionLayer | None) -> Tensor:
    """Embed an array of item indices, one path per entry.

    ``z`` True takes the projected content vector, False the table row.
    Padding entries (``PAD``) always read the zero row. Gradient flows only
    through the path each entry selected.
    """
    items = np.asarray(items, dtype=np.int64)
    z = np.asarray(z, dtype=bool)
    if z.shape != items.shape:
        raise ShapeError(f"path mask {z.shape} does not match items {items.shape}")
    z = z & (items >= 0)
    dense_pos = np.flatnonzero(z.reshape(-1))
    flat_items = items.reshape(-1)
    id_items = flat_items.copy()
    id_items[dense_pos] = PAD
    base = ops.embedding_gather(ids.table, ids.rows_for(id_items).reshape(items.shape))
    if dense_pos.size == 0:
        return base
    if proj is None:
        raise ContractError("dense path requested but the model has no projection layer")
    dense_items = flat_items[dense_pos]
    if content_matrix is None or content_mask is None or not content_mask[dense_items].all():
        missing = dense_items if content_mask is None else dense_items[~content_mask[dense_items]]
        raise MissingContentError(f"no content vector for item index {int(missing[0])}")
    dense_rows = project_content(content_matrix[dense_items], proj)
    return ops.masked_fill_rows(base, dense_rows, dense_pos)


def resolve_embedding(item: int, z: bool, ids: IdEmbeddingTable, contents, proj: ProjectionLayer | None) -> Tensor:
    """Single-item form of :func:`resolve_embeddings`; returns a (d,) tensor."""
    matrix = contents.matrix if contents is not None else None
    mask = contents.mask if contents is not None else None
    out = resolve_embeddings(np.array([item]), np.array([z]), ids, matrix, mask, proj)
    return ops.reshape(out, (ids.d,))
