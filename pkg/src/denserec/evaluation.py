"""Full-catalog retrieval, HitRate@K with cold-start slices, and the p_dense sweep."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .data.catalog import CatalogIndex
from .data.sequences import SequenceExample
from .errors import ContractError
from .model import DenseRecModel, pad_batch, project_content
from .model.embedding import IdEmbeddingTable, ProjectionLayer

log = logging.getLogger(__name__)

ID_PATH = "id"
DENSE_PATH = "dense"
MODES = ("denserec", "id_only")


@dataclass
class CandidateMatrix:
    items: np.ndarray
    embeddings: np.ndarray
    tags: np.ndarray
    excluded: int = 0
    row_of: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.row_of = {int(i): r for r, i in enumerate(self.items)}

    def __len__(self) -> int:
        return len(self.items)


def assemble_candidates(catalog: CatalogIndex, ids: IdEmbeddingTable, contents, proj: ProjectionLayer | None,
                        items: Iterable[int] | None = None) -> CandidateMatrix:
    """Known items use their ID rows, cold items their projected content vector.

    Cold items without a content vector (or any cold item when ``proj`` is
    None) cannot be represented and are left out; the count is kept.
    """
    pool = np.arange(len(catalog)) if items is None else np.array(sorted(set(int(i) for i in items)), dtype=np.int64)
    known = pool[pool < catalog.n_known]
    cold = pool[pool >= catalog.n_known]
    has = np.zeros(len(cold), dtype=bool) if (contents is None or proj is None) else contents.mask[cold]
    usable = cold[has]
    excluded = int(len(cold) - len(usable))
    if excluded and proj is not None:
        log.warning("%d cold candidate items have no content vector and were excluded", excluded)
    d = ids.d
    rows = [ids.table.data[ids.rows_for(known)]]
    if len(usable):
        rows.append(project_content(contents.matrix[usable], proj).data)
    emb = np.concatenate(rows, axis=0) if rows else np.zeros((0, d))
    item_order = np.concatenate([known, usable])
    tags = np.array([ID_PATH] * len(known) + [DENSE_PATH] * len(usable))
    order = np.argsort(item_order, kind="stable")
    return CandidateMatrix(item_order[order], np.ascontiguousarray(emb[order]), tags[order], excluded)


def extend_candidates(cands: CandidateMatrix, item_indices: Sequence[int], vectors: np.ndarray,
                      proj: ProjectionLayer) -> CandidateMatrix:
    """Add brand-new items by projecting their content vectors; no retraining."""
    new = project_content(np.asarray(vectors), proj).data
    items = np.concatenate([cands.items, np.asarray(item_indices, dtype=np.int64)])
    emb = np.concatenate([cands.embeddings, new.astype(cands.embeddings.dtype)], axis=0)
    tags = np.concatenate([cands.tags, np.array([DENSE_PATH] * len(item_indices))])
    order = np.argsort(items, kind="stable")
    return CandidateMatrix(items[order], np.ascontiguousarray(emb[order]), tags[order], cands.excluded)


def model_candidates(model: DenseRecModel, catalog: CatalogIndex, contents=None, items=None) -> CandidateMatrix:
    if contents is None and model.content_mask is not None:
        from .data.content import ContentEmbeddingStore
        contents = ContentEmbeddingStore.from_arrays(model.content_matrix, model.content_mask)
    return assemble_candidates(catalog, model.ids, contents, model.projection, items)


def _test_inputs(items: Sequence[int], model: DenseRecModel, mode: str) -> tuple[list[int], list[bool]]:
    n_known = model.n_known
    if mode == "id_only":
        kept = [i for i in items if i < n_known]
        return kept, [False] * len(kept)
    kept, z = [], []
    for i in items:
        if i < n_known:
            kept.append(i)
            z.append(False)
        elif model.has_content(np.array([i]))[0]:
            kept.append(i)
            z.append(True)
    return kept, z


def _check_mode(model: DenseRecModel, mode: str) -> None:
    if mode not in MODES:
        raise ContractError(f"unknown evaluation mode {mode!r}")
    if mode == "denserec" and model.projection is None:
        raise ContractError("denserec evaluation needs a model with a projection layer")


def encode_test_sequence(items: Sequence[int], model: DenseRecModel, mode: str = "denserec") -> np.ndarray | None:
    """h_n for one test sequence, or None when nothing representable remains.

    Known items take the ID path and cold items the dense path; ``id_only``
    drops cold items instead. No randomness, dropout off.
    """
    _check_mode(model, mode)
    kept, z = _test_inputs(items, model, mode)
    if not kept:
        return None
    return model.encode_sequence(kept, z)


def encode_test_batch(examples: Sequence[SequenceExample], model: DenseRecModel, mode: str,
                      chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Representations (B, d) and a skipped mask for many test sequences."""
    _check_mode(model, mode)
    d = model.config.d
    H = np.zeros((len(examples), d), dtype=model.config.dtype)
    skipped = np.zeros(len(examples), dtype=bool)
    prepared = [_test_inputs(ex.inputs, model, mode) for ex in examples]
    for r, (kept, _) in enumerate(prepared):
        skipped[r] = not kept
    live = np.flatnonzero(~skipped)
    max_len = model.config.max_len
    for s in range(0, len(live), chunk):
        rows = live[s:s + chunk]
        seqs = [prepared[r][0] for r in rows]
        tokens = pad_batch(seqs, max_len)
        z = np.zeros(tokens.shape, dtype=bool)
        for j, r in enumerate(rows):
            flags = prepared[r][1][-tokens.shape[1]:]
            z[j, tokens.shape[1] - len(flags):] = flags
        H[rows] = model.encode(tokens, z, training=False).data
    return H, skipped


def topk(scores: np.ndarray, k: int) -> np.ndarray:
    """Exact top-k positions by descending score, ties to the lower position."""
    scores = np.asarray(scores)
    n = scores.shape[-1]
    if k < 1 or k > n:
        raise ContractError(f"top-k with k={k} over {n} candidates")
    if scores.ndim == 1:
        return kernels.topk_rows(scores[None, :], k)[0]
    return kernels.topk_rows(scores, k)


@dataclass
class EvalReport:
    k: int
    mode: str
    n_examples: int
    hits: int
    cold_examples: int
    cold_hits: int
    known_examples: int
    known_hits: int
    skipped: int
    structural_misses: int
    n_candidates: int
    config: dict = field(default_factory=dict)

    @property
    def hit_rate(self) -> float:
        return self.hits / self.n_examples if self.n_examples else 0.0

    @property
    def hit_rate_cold(self) -> float:
        return self.cold_hits / self.cold_examples if self.cold_examples else 0.0

    @property
    def hit_rate_known(self) -> float:
        return self.known_hits / self.known_examples if self.known_examples else 0.0

    @property
    def cold_hit_share(self) -> float:
        return self.cold_hits / self.hits if self.hits else 0.0

    def records(self) -> list[dict]:
        k = self.k
        return [
            {"name": "hit_rate", "slice": "all", "k": k, "value": self.hit_rate, "count": self.n_examples},
            {"name": "hit_rate", "slice": "cold_target", "k": k, "value": self.hit_rate_cold, "count": self.cold_examples},
            {"name": "hit_rate", "slice": "known_target", "k": k, "value": self.hit_rate_known, "count": self.known_examples},
            {"name": "cold_hit_share", "slice": "hits", "k": k, "value": self.cold_hit_share, "count": self.hits},
            {"name": "skipped_sequences", "slice": "all", "k": k, "value": float(self.skipped), "count": self.n_examples},
            {"name": "structural_misses", "slice": "all", "k": k, "value": float(self.structural_misses), "count": self.n_examples},
        ]

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(hit_rate=self.hit_rate, hit_rate_cold=self.hit_rate_cold, hit_rate_known=self.hit_rate_known,
                   cold_hit_share=self.cold_hit_share)
        return out


def _rank_chunk(H: np.ndarray, emb: np.ndarray, kmax: int) -> np.ndarray:
    return topk(H @ emb.T, kmax)


def hit_rate_at_k(examples: Sequence[SequenceExample], model: DenseRecModel, candidates: CandidateMatrix,
                  ks: int | Sequence[int] = 100, mode: str | None = None, workers: int = 1,
                  chunk: int = 256) -> list[EvalReport]:
    """HitRate@k for each k, with cold/known target slices.

    Skipped sequences and targets outside the candidate set stay in the
    denominator as misses.
    """
    ks = [ks] if isinstance(ks, (int, np.integer)) else list(ks)
    if not ks or min(ks) < 1:
        raise ContractError("k must be >= 1")
    mode = mode or model.mode
    n = len(candidates)
    if n == 0:
        raise ContractError("empty candidate set")
    kmax = min(max(ks), n)
    H, skipped = encode_test_batch(examples, model, mode, chunk)
    targets = np.array([ex.target for ex in examples], dtype=np.int64)
    target_rows = np.array([candidates.row_of.get(int(t), -1) for t in targets], dtype=np.int64)
    structural = target_rows < 0
    if structural.any():
        log.info("%d test targets are not in the candidate set (structural misses)", int(structural.sum()))

    live = np.flatnonzero(~skipped)
    chunks = [live[s:s + chunk] for s in range(0, len(live), chunk)]
    emb = candidates.embeddings.astype(H.dtype, copy=False)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tops = list(pool.map(lambda rows: _rank_chunk(H[rows], emb, kmax), chunks))
    else:
        tops = [_rank_chunk(H[rows], emb, kmax) for rows in chunks]
    # position of the target within the top list, kmax when absent
    rank = np.full(len(examples), np.iinfo(np.int64).max, dtype=np.int64)
    for rows, top in zip(chunks, tops):
        match = top == target_rows[rows, None]
        found = match.any(axis=1)
        rank[rows[found]] = match[found].argmax(axis=1)

    cold = targets >= model.n_known
    reports = []
    for k in ks:
        hit = rank < k
        reports.append(EvalReport(
            k=k, mode=mode, n_examples=len(examples), hits=int(hit.sum()),
            cold_examples=int(cold.sum()), cold_hits=int((hit & cold).sum()),
            known_examples=int((~cold).sum()), known_hits=int((hit & ~cold).sum()),
            skipped=int(skipped.sum()), structural_misses=int(structural.sum()), n_candidates=n,
            config={"p_dense": model.config.p_dense, "d": model.config.d},
        ))
    return reports


def format_reports(reports: Sequence[EvalReport]) -> str:
    head = "mode\tk\tHR\tHR_cold\tHR_known\tcold_hit_share\tn\tcold_n\tskipped\tstructural_miss\n"
    lines = [f"{r.mode}\t{r.k}\t{r.hit_rate:.4f}\t{r.hit_rate_cold:.4f}\t{r.hit_rate_known:.4f}\t"
             f"{r.cold_hit_share:.4f}\t{r.n_examples}\t{r.cold_examples}\t{r.skipped}\t{r.structural_misses}\n"
             for r in reports]
    return head + "".join(lines)


def report_jsonl(reports: Sequence[EvalReport]) -> str:
    return "".join(json.dumps(rec, sort_keys=True) + "\n" for r in reports for rec in r.records())
