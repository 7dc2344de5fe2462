"""Dual-path training loop with the sampled binary cross-entropy objective."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data.sequences import SequenceExample, sample_negatives_batch
from .errors import ContractError, NumericalError
from .model import DenseRecModel, pad_batch, save_checkpoint
from .numerics import Adam, Tensor, backward, ops
from .rng import RngStream

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 512
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float | None = None
    seed: int = 0
    log_every: int = 0
    bucket_by_length: bool = True


@dataclass
class EpochRow:
    epoch: int
    mean_loss: float
    dense_fraction: float
    wallclock_s: float
    grad_norm_mean: float
    grad_norm_max: float
    dense_draws: int = 0
    total_draws: int = 0
    forced_id: int = 0

    def log_line(self) -> str:
        return f"{self.epoch}\t{self.mean_loss:.6f}\t{self.dense_fraction:.6f}\t{self.wallclock_s:.3f}"


@dataclass
class TrainReport:
    rows: list[EpochRow] = field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [r.mean_loss for r in self.rows]

    @property
    def dense_fraction(self) -> float:
        total = sum(r.total_draws for r in self.rows)
        return sum(r.dense_draws for r in self.rows) / total if total else 0.0

    def log_text(self) -> str:
        return "".join(r.log_line() + "\n" for r in self.rows)


def batch_loss(h: Tensor, target_emb: Tensor, negative_embs: Tensor) -> Tensor:
    """Per-example loss, shape (B,): ``-log s(h.e+) - sum_j log s(-h.e-_j)``."""
    b, d = h.shape
    pos = ops.sum_last(ops.mul(h, target_emb))
    neg = ops.reshape(ops.matmul(negative_embs, ops.reshape(h, (b, d, 1))), (b, negative_embs.shape[1]))
    return ops.sub(ops.scale(ops.log_sigmoid(pos), -1.0), ops.sum_last(ops.log_sigmoid(ops.scale(neg, -1.0))))


def compute_loss(h_n, target_emb, negative_embs) -> Tensor:
    """Scalar loss for one sequence: h_n (d,), target (d,), negatives (K, d)."""
    h_n, target_emb, negative_embs = (ops.as_tensor(x) for x in (h_n, target_emb, negative_embs))
    d = h_n.shape[-1]
    if target_emb.shape != (d,) or negative_embs.ndim != 2 or negative_embs.shape[1] != d:
        raise ContractError(f"loss inputs disagree: h {h_n.shape}, target {target_emb.shape}, negatives {negative_embs.shape}")
    k = negative_embs.shape[0]
    out = batch_loss(ops.reshape(h_n, (1, d)), ops.reshape(target_emb, (1, d)), ops.reshape(negative_embs, (1, k, d)))
    return ops.reshape(out, ())


@dataclass
class Batch:
    tokens: np.ndarray
    targets: np.ndarray
    negatives: np.ndarray
    z_in: np.ndarray
    z_target: np.ndarray
    z_neg: np.ndarray
    forced_id: int = 0

    def dense_counts(self) -> tuple[int, int]:
        real = self.tokens >= 0
        dense = int(self.z_in[real].sum() + self.z_target.sum() + self.z_neg.sum())
        total = int(real.sum() + self.z_target.size + self.z_neg.size)
        return dense, total


def make_batch(model: DenseRecModel, examples: Sequence[SequenceExample], neg_rng: RngStream,
               path_rng: RngStream | None) -> Batch:
    cfg = model.config
    tokens = pad_batch([ex.inputs for ex in examples], cfg.max_len)
    targets = np.array([ex.target for ex in examples], dtype=np.int64)
    negs = sample_negatives_batch(targets, model.n_known, cfg.num_negatives, neg_rng)
    if model.projection is None or path_rng is None:
        zeros = lambda shape: np.zeros(shape, dtype=bool)  # noqa: E731
        return Batch(tokens, targets, negs, zeros(tokens.shape), zeros(targets.shape), zeros(negs.shape))
    z_in = path_rng.bernoulli(cfg.p_dense, tokens.shape)
    z_t = path_rng.bernoulli(cfg.p_dense, targets.shape)
    z_n = path_rng.bernoulli(cfg.p_dense, negs.shape)
    forced = 0
    # items without a content vector fall back to the ID path
    for z, items in ((z_in, tokens), (z_t, targets), (z_n, negs)):
        z &= items >= 0
        ok = model.has_content(items)
        forced += int((z & ~ok).sum())
        z &= ok
    return Batch(tokens, targets, negs, z_in, z_t, z_n, forced)


def forward_loss(model: DenseRecModel, batch: Batch, training: bool, dropout_rng: RngStream | None) -> Tensor:
    """Mean loss over a batch with the batch's fixed path choices."""
    h = model.encode(batch.tokens, batch.z_in, training=training, rng=dropout_rng)
    e_t = model.embed(batch.targets, batch.z_target)
    e_n = model.embed(batch.negatives, batch.z_neg)
    return ops.mean_all(batch_loss(h, e_t, e_n))


def _streams(cfg: TrainConfig, epoch: int) -> dict[str, RngStream]:
    return {name: RngStream(cfg.seed, name).spawn(epoch) for name in ("shuffle", "negatives", "path_mask", "dropout")}


def make_optimizer(model: DenseRecModel, cfg: TrainConfig) -> Adam:
    return Adam(model.parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.clip_norm)


def epoch_batches(data: Sequence[SequenceExample], cfg: TrainConfig, rng: RngStream) -> list[np.ndarray]:
    """Example indices per batch in a seeded random order.

    With ``bucket_by_length`` the shuffled examples are stably sorted by input
    length before cutting batches (so padding stays short) and the batch
    order is shuffled again.
    """
    order = rng.permutation(len(data))
    if cfg.bucket_by_length:
        lengths = np.array([len(data[i].inputs) for i in order])
        order = order[np.argsort(lengths, kind="stable")]
    batches = [order[s:s + cfg.batch_size] for s in range(0, len(order), cfg.batch_size)]
    if cfg.bucket_by_length:
        batches = [batches[i] for i in rng.permutation(len(batches))]
    return batches


def train_epoch(model: DenseRecModel, data: Sequence[SequenceExample], cfg: TrainConfig, epoch: int,
                optimizer: Adam | None = None) -> EpochRow:
    """One pass over ``data`` in an epoch-seeded order, one Adam step per batch."""
    if not data:
        raise ContractError("no training examples")
    optimizer = optimizer or make_optimizer(model, cfg)
    rngs = _streams(cfg, epoch)
    batches = epoch_batches(data, cfg, rngs["shuffle"])
    t0 = time.perf_counter()
    loss_sum, n_seen = 0.0, 0
    dense, total, forced = 0, 0, 0
    norms = []
    for b, idx in enumerate(batches):
        examples = [data[i] for i in idx]
        batch = make_batch(model, examples, rngs["negatives"], rngs["path_mask"])
        optimizer.zero_grad()
        loss = forward_loss(model, batch, training=True, dropout_rng=rngs["dropout"])
        value = float(loss.data)
        if not np.isfinite(value):
            raise NumericalError(f"epoch {epoch} batch {b}: non-finite loss {value} "
                                 f"(batch size {len(examples)}, sequence width {batch.tokens.shape[1]})")
        backward(loss)
        try:
            norms.append(optimizer.step())
        except NumericalError as exc:
            raise NumericalError(f"epoch {epoch} batch {b}: {exc}") from exc
        model.rezero_padding()
        loss_sum += value * len(examples)
        n_seen += len(examples)
        d_, t_ = batch.dense_counts()
        dense, total, forced = dense + d_, total + t_, forced + batch.forced_id
        if cfg.log_every and (b + 1) % cfg.log_every == 0:
            log.debug("epoch %d batch %d loss %.5f", epoch, b + 1, value)
    if forced:
        log.warning("epoch %d: %d dense-path draws fell back to the ID path (no content vector)", epoch, forced)
    return EpochRow(epoch, loss_sum / n_seen, dense / total if total else 0.0, time.perf_counter() - t0,
                    float(np.mean(norms)), float(np.max(norms)), dense, total, forced)


def evaluate_loss(model: DenseRecModel, data: Sequence[SequenceExample], cfg: TrainConfig, batch_size: int = 512) -> float:
    """Mean loss without updates or dropout, with negatives and paths from a fixed stream."""
    neg = RngStream(cfg.seed, "eval_negatives")
    path = RngStream(cfg.seed, "eval_path_mask")
    total = 0.0
    for start in range(0, len(data), batch_size):
        examples = data[start:start + batch_size]
        batch = make_batch(model, examples, neg, path)
        total += float(forward_loss(model, batch, training=False, dropout_rng=None).data) * len(examples)
    return total / len(data)


def train(model: DenseRecModel, data: Sequence[SequenceExample], cfg: TrainConfig,
          checkpoint_path: Path | None = None, log_path: Path | None = None) -> tuple[TrainReport, DenseRecModel]:
    """Run ``cfg.epochs`` epochs; optionally write the log and final checkpoint."""
    optimizer = make_optimizer(model, cfg)
    report = TrainReport()
    for epoch in range(1, cfg.epochs + 1):
        row = train_epoch(model, data, cfg, epoch, optimizer)
        report.rows.append(row)
        log.info("epoch %d/%d loss %.5f dense %.3f (%.1fs)", epoch, cfg.epochs, row.mean_loss, row.dense_fraction, row.wallclock_s)
        if log_path is not None:
            Path(log_path).write_text("epoch\tmean_loss\tdense_fraction\twallclock_s\n" + report.log_text(), encoding="utf-8")
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path)
    return report, model
