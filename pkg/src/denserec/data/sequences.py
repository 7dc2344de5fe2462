"""Per-user chronological sequences and next-item examples."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..errors import ConfigError, ContractError
from ..rng import RngStream
from .catalog import CatalogIndex
from .events import InteractionEvent

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SequenceExample:
    inputs: tuple[int, ...]
    target: int
    user_id: str
    split: str


def user_sequences(events: Iterable[InteractionEvent]) -> dict[str, list[InteractionEvent]]:
    """Group time-sorted events by user, keeping first-seen user order."""
    grouped: dict[str, list[InteractionEvent]] = defaultdict(list)
    for e in events:
        grouped[e.user_id].append(e)
    return dict(grouped)


def build_sequences(events: Iterable[InteractionEvent], catalog: CatalogIndex, max_len: int,
                    split: str = "train") -> tuple[list[SequenceExample], int]:
    """Examples for one split plus the number of skipped users.

    ``train`` yields a prefix -> next-item example at every position;
    ``valid``/``test`` yield one example per user with the last item as
    target. Inputs keep only the most recent ``max_len`` items.
    """
    if max_len < 1:
        raise ContractError("max_len must be positive")
    examples: list[SequenceExample] = []
    skipped = 0
    for user, evs in user_sequences(events).items():
        seq = [catalog.index(e.item_id) for e in evs]
        if len(seq) < 2:
            skipped += 1
            continue
        if split == "train":
            for j in range(1, len(seq)):
                examples.append(SequenceExample(tuple(seq[max(0, j - max_len):j]), seq[j], user, split))
        else:
            examples.append(SequenceExample(tuple(seq[:-1][-max_len:]), seq[-1], user, split))
    if skipped and split != "train":
        log.info("%s split: skipped %d users with fewer than 2 events", split, skipped)
    return examples, skipped


def sample_negatives(target: int, vocab_size: int, k: int, rng: RngStream) -> np.ndarray:
    """K uniform draws from ``0 .. vocab_size-1``, redrawing any equal to target."""
    return sample_negatives_batch(np.array([target]), vocab_size, k, rng)[0]


def sample_negatives_batch(targets: np.ndarray, vocab_size: int, k: int, rng: RngStream) -> np.ndarray:
    if vocab_size <= k + 1:
        raise ConfigError(f"training vocabulary of {vocab_size} items is too small for {k} negatives")
    targets = np.asarray(targets, dtype=np.int64)
    negs = rng.integers(0, vocab_size, size=(len(targets), k))
    clash = negs == targets[:, None]
    while clash.any():
        negs[clash] = rng.integers(0, vocab_size, size=int(clash.sum()))
        clash = negs == targets[:, None]
    return negs
