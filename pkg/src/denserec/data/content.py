"""Dense content vectors keyed by catalog index, plus the embeddings file format."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError
from .catalog import CatalogIndex

log = logging.getLogger(__name__)

HEADER_TAG = "denserec-emb"
FORMAT_VERSION = 1


class ContentEmbeddingStore:
    """Content vectors for some or all catalog items, all of width ``d_c``."""

    def __init__(self, d_c: int, n_items: int, dtype=np.float64):
        if d_c < 1:
            raise DataError("content dimension must be positive")
        self.d_c = d_c
        self.matrix = np.zeros((n_items, d_c), dtype=dtype)
        self.mask = np.zeros(n_items, dtype=bool)

    @classmethod
    def from_arrays(cls, matrix: np.ndarray, mask: np.ndarray | None = None) -> "ContentEmbeddingStore":
        store = cls(matrix.shape[1], matrix.shape[0], dtype=matrix.dtype)
        store.matrix[:] = matrix
        store.mask[:] = True if mask is None else mask
        store.matrix[~store.mask] = 0
        return store

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __contains__(self, idx: int) -> bool:
        return 0 <= idx < len(self.mask) and bool(self.mask[idx])

    def __getitem__(self, idx: int) -> np.ndarray:
        if idx not in self:
            raise KeyError(idx)
        return self.matrix[idx]

    def set(self, idx: int, vector) -> None:
        vec = np.asarray(vector, dtype=self.matrix.dtype)
        if vec.shape != (self.d_c,):
            raise DataError(f"content vector of width {vec.shape} does not match d_c={self.d_c}")
        if not np.all(np.isfinite(vec)):
            raise DataError(f"non-finite content vector for item index {idx}")
        self.matrix[idx] = vec
        self.mask[idx] = True

    def astype(self, dtype) -> "ContentEmbeddingStore":
        return ContentEmbeddingStore.from_arrays(self.matrix.astype(dtype), self.mask.copy())


@dataclass
class CoverageStats:
    rows: int = 0
    stored: int = 0
    not_in_catalog: int = 0
    duplicates: int = 0
    known_covered: float = 0.0
    cold_covered: float = 0.0
    extra: dict = field(default_factory=dict)


def read_embeddings_file(path: Path) -> tuple[int, list[tuple[str, np.ndarray]]]:
    """Parse the embeddings format into ``(d_c, [(item_id, vector), ...])``."""
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read embeddings file {path}: {exc}") from exc
    rows: list[tuple[str, np.ndarray]] = []
    with fh:
        header = fh.readline()
        if not header.strip():
            return 0, rows
        parts = header.split()
        if len(parts) != 4 or parts[0] != HEADER_TAG:
            raise DataError(f"{path}:1: expected '{HEADER_TAG} {FORMAT_VERSION} <count> <d_c>' header")
        if int(parts[1]) != FORMAT_VERSION:
            raise DataError(f"{path}:1: unsupported embeddings format version {parts[1]}")
        count, d_c = int(parts[2]), int(parts[3])
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            item, sep, values = line.rstrip("\n").partition("\t")
            if not sep or not item:
                raise DataError(f"{path}:{lineno}: expected item_id<TAB>values")
            try:
                vec = np.array([float(v) for v in values.split(",")], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: unparseable float ({exc})") from exc
            if vec.shape[0] != d_c:
                raise DataError(f"{path}:{lineno}: row {lineno - 1} has {vec.shape[0]} values, expected d_c={d_c}")
            if not np.all(np.isfinite(vec)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            rows.append((item, vec))
    if count != len(rows):
        log.warning("%s: header announces %d rows, found %d", path, count, len(rows))
    return d_c, rows


def load_content_embeddings(path: Path, catalog: CatalogIndex, dtype=np.float64) -> tuple[ContentEmbeddingStore, CoverageStats]:
    d_c, rows = read_embeddings_file(path)
    stats = CoverageStats(rows=len(rows))
    store = ContentEmbeddingStore(max(d_c, 1), len(catalog), dtype=dtype)
    for item, vec in rows:
        idx = catalog.get(item)
        if idx is None:
            stats.not_in_catalog += 1
            continue
        if store.mask[idx]:
            stats.duplicates += 1
            log.warning("duplicate content vector for %r; keeping the last one", item)
        store.set(idx, vec)
    stats.stored = len(store)
    known = store.mask[: catalog.n_known]
    cold = store.mask[catalog.n_known :]
    stats.known_covered = float(known.mean()) if known.size else 0.0
    stats.cold_covered = float(cold.mean()) if cold.size else 0.0
    if stats.not_in_catalog:
        log.info("%d content rows refer to items outside the catalog and were ignored", stats.not_in_catalog)
    return store, stats


def write_embeddings_file(path: Path, items: list[str], vectors: np.ndarray) -> None:
    vectors = np.asarray(vectors)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{HEADER_TAG} {FORMAT_VERSION} {len(items)} {vectors.shape[1]}\n")
        for item, vec in zip(items, vectors):
            fh.write(item + "\t" + ",".join(repr(float(v)) for v in vec) + "\n")
