"""Train-then-evaluate runs and the p_dense sweep."""
from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data.catalog import CatalogIndex
from .data.content import ContentEmbeddingStore
from .data.pipeline import PreparedData
from .errors import ContractError
from .evaluation import EvalReport, assemble_candidates, hit_rate_at_k
from .model import DenseRecModel, ModelConfig
from .training import TrainConfig, TrainReport, train

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(round(0.1 * i, 1) for i in range(11))


def store_for_catalog(item_ids: Sequence[str], vectors: np.ndarray, catalog: CatalogIndex) -> ContentEmbeddingStore:
    """Align externally keyed content vectors with catalog indices."""
    vectors = np.asarray(vectors)
    store = ContentEmbeddingStore(vectors.shape[1], len(catalog), dtype=vectors.dtype)
    for item, vec in zip(item_ids, vectors):
        idx = catalog.get(item)
        if idx is not None:
            store.set(idx, vec)
    return store


def build_model(model_cfg: ModelConfig, data: PreparedData, store: ContentEmbeddingStore | None,
                mode: str, seed: int) -> DenseRecModel:
    if mode == "id_only":
        model_cfg = dataclasses.replace(model_cfg, p_dense=0.0)
    model = DenseRecModel(model_cfg, data.catalog.n_known, seed=seed, with_projection=mode == "denserec")
    model.attach_content(store)
    return model


def candidate_pool(data: PreparedData) -> list[int]:
    """Training vocabulary plus every item seen in the test window."""
    return sorted(set(range(data.catalog.n_known)) | data.test_items)


def evaluate(model: DenseRecModel, data: PreparedData, store: ContentEmbeddingStore | None,
             ks: Sequence[int], mode: str | None = None, workers: int = 1) -> list[EvalReport]:
    mode = mode or model.mode
    proj = model.projection if mode == "denserec" else None
    cands = assemble_candidates(data.catalog, model.ids, store, proj, candidate_pool(data))
    return hit_rate_at_k(data.test, model, cands, ks, mode=mode, workers=workers)


@dataclass
class RunResult:
    model: DenseRecModel
    train_report: TrainReport
    reports: list[EvalReport]


def fit_and_evaluate(data: PreparedData, store: ContentEmbeddingStore | None, model_cfg: ModelConfig,
                     train_cfg: TrainConfig, mode: str = "denserec", ks: Sequence[int] = (10, 100),
                     workers: int = 1) -> RunResult:
    model = build_model(model_cfg, data, store, mode, train_cfg.seed)
    report, model = train(model, data.train, train_cfg)
    return RunResult(model, report, evaluate(model, data, store, ks, mode, workers))


@dataclass
class SweepRow:
    """One trained model of the sweep; ``reports`` holds one entry per k."""
    p_dense: float
    mode: str
    reports: list[EvalReport]
    final_loss: float

    def hit_rate(self, k: int) -> float:
        return self.report(k).hit_rate

    def report(self, k: int) -> EvalReport:
        for r in self.reports:
            if r.k == k:
                return r
        raise KeyError(k)


def sweep_p_dense(values: Sequence[float], data: PreparedData, store: ContentEmbeddingStore, model_cfg: ModelConfig,
                  train_cfg: TrainConfig, ks: Sequence[int] = (10, 100), workers: int = 1) -> list[SweepRow]:
    """Train and evaluate one model per p_dense with identical seeds.

    p_dense = 0 never trains the projection, so that point is the ID-only
    baseline and is run as one.
    """
    if any(not 0.0 <= v <= 1.0 for v in values):
        raise ContractError("p_dense values must lie in [0, 1]")
    rows = []
    for p in values:
        mode = "id_only" if p == 0.0 else "denserec"
        cfg = dataclasses.replace(model_cfg, p_dense=float(p))
        result = fit_and_evaluate(data, store, cfg, train_cfg, mode, ks, workers)
        final = result.train_report.losses[-1] if result.train_report.rows else float("nan")
        rows.append(SweepRow(float(p), mode, result.reports, final))
        log.info("p_dense=%.2f %s", p, ", ".join(f"HR@{r.k}={r.hit_rate:.4f}" for r in result.reports))
    return rows


def format_sweep(rows: Sequence[SweepRow]) -> str:
    """Plain table, one line per p_dense value."""
    ks = [r.k for r in rows[0].reports] if rows else []
    head = ["p_dense", "mode"]
    for k in ks:
        head += [f"HR@{k}", f"HR_cold@{k}", f"HR_known@{k}", f"cold_hit_share@{k}"]
    out = ["\t".join(head + ["n", "final_loss"])]
    for row in rows:
        cells = [f"{row.p_dense:.2f}", row.mode]
        for k in ks:
            r = row.report(k)
            cells += [f"{r.hit_rate:.4f}", f"{r.hit_rate_cold:.4f}", f"{r.hit_rate_known:.4f}", f"{r.cold_hit_share:.4f}"]
        n = row.reports[0].n_examples if row.reports else 0
        out.append("\t".join(cells + [str(n), f"{row.final_loss:.6f}"]))
    return "\n".join(out) + "\n"


def sweep_jsonl(rows: Sequence[SweepRow]) -> str:
    lines = []
    for row in rows:
        for r in row.reports:
            for rec in r.records():
                rec.update(p_dense=row.p_dense, mode=row.mode)
                lines.append(json.dumps(rec, sort_keys=True) + "\n")
    return "".join(lines)
