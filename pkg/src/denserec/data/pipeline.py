"""End-to-end preparation: filter, split, index, build examples, summarise."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import CatalogIndex
from .events import (MIN_ITEM_COUNT, MIN_USER_COUNT, InteractionEvent, TemporalSplit, ingest_events,
                     min_count_keep_sets, temporal_split, write_events)
from .sequences import SequenceExample, build_sequences

log = logging.getLogger(__name__)

SPLIT_FILES = {"train": "train.tsv", "valid": "valid.tsv", "test": "test.tsv"}


@dataclass
class PreparedData:
    catalog: CatalogIndex
    split: TemporalSplit
    train: list[SequenceExample]
    valid: list[SequenceExample]
    test: list[SequenceExample]
    skipped: dict[str, int]

    @property
    def test_items(self) -> set[int]:
        return {self.catalog.index(e.item_id) for e in self.split.test}

    def stats(self) -> dict:
        return dataset_stats(self)


def prepare_dataset(events: list[InteractionEvent], train_frac: float = 0.8, valid_frac: float = 0.1,
                    max_len: int = 30, min_item: int = MIN_ITEM_COUNT, min_user: int = MIN_USER_COUNT) -> PreparedData:
    """Filter counts over all events, split by time, and restrict only training to the survivors."""
    items, users = min_count_keep_sets(events, min_item, min_user)
    split = temporal_split(events, train_frac, valid_frac)
    split.train = [e for e in split.train if e.item_id in items and e.user_id in users]
    catalog = CatalogIndex.build((e.item_id for e in split.train),
                                 [e.item_id for e in split.valid] + [e.item_id for e in split.test])
    return _examples(catalog, split, max_len)


def _examples(catalog: CatalogIndex, split: TemporalSplit, max_len: int) -> PreparedData:
    out = {}
    skipped = {}
    for name in ("train", "valid", "test"):
        out[name], skipped[name] = build_sequences(getattr(split, name), catalog, max_len, name)
    return PreparedData(catalog, split, out["train"], out["valid"], out["test"], skipped)


def dataset_stats(data: PreparedData) -> dict:
    """Summary in the shape of the usual dataset-statistics table."""
    cat = data.catalog
    all_events = data.split.train + data.split.valid + data.split.test
    per_user: dict[str, int] = {}
    for e in all_events:
        per_user[e.user_id] = per_user.get(e.user_id, 0) + 1
    test_targets = np.array([ex.target for ex in data.test], dtype=np.int64)
    test_inputs = np.array([i for ex in data.test for i in ex.inputs], dtype=np.int64)
    return {
        "items": len(cat),
        "known_items": cat.n_known,
        "cold_items": cat.n_cold,
        "users": len(per_user),
        "avg_sequence_length": float(np.mean(list(per_user.values()))) if per_user else 0.0,
        "train_events": len(data.split.train),
        "valid_events": len(data.split.valid),
        "test_events": len(data.split.test),
        "train_examples": len(data.train),
        "valid_examples": len(data.valid),
        "test_examples": len(data.test),
        "cold_target_share": float(np.mean(test_targets >= cat.n_known)) if test_targets.size else 0.0,
        "cold_in_test_seqs_share": float(np.mean(test_inputs >= cat.n_known)) if test_inputs.size else 0.0,
        "skipped_valid_users": data.skipped["valid"],
        "skipped_test_users": data.skipped["test"],
        "train_cutoff": data.split.train_cutoff,
        "valid_cutoff": data.split.valid_cutoff,
    }


STAT_LABELS = [
    ("items", "# Items"),
    ("users", "# Users"),
    ("avg_sequence_length", "Avg. sequence length"),
    ("cold_target_share", "Cold-start target items"),
    ("cold_in_test_seqs_share", "Cold-start items in test seqs."),
]


def format_stats_table(stats: dict) -> str:
    lines = ["Statistic\tValue"]
    for key, label in STAT_LABELS:
        v = stats[key]
        if key.endswith("share"):
            lines.append(f"{label}\t{100 * v:.1f}%")
        elif isinstance(v, float):
            lines.append(f"{label}\t{v:.2f}")
        else:
            lines.append(f"{label}\t{v:,}")
    return "\n".join(lines) + "\n"


def write_prepared(data: PreparedData, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, fname in SPLIT_FILES.items():
        paths[name] = out / fname
        write_events(paths[name], getattr(data.split, name))
    paths["catalog"] = out / "catalog.tsv"
    data.catalog.save(paths["catalog"])
    stats = data.stats()
    paths["stats"] = out / "stats.tsv"
    paths["stats"].write_text(format_stats_table(stats), encoding="utf-8")
    paths["stats_json"] = out / "stats.json"
    paths["stats_json"].write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def load_prepared(out_dir, max_len: int) -> PreparedData:
    out = Path(out_dir)
    catalog = CatalogIndex.load(out / "catalog.tsv")
    parts = {name: ingest_events(out / fname) for name, fname in SPLIT_FILES.items()}
    meta = json.loads((out / "stats.json").read_text(encoding="utf-8"))
    split = TemporalSplit(parts["train"], parts["valid"], parts["test"], meta.get("train_cutoff"), meta.get("valid_cutoff"))
    return _examples(catalog, split, max_len)
