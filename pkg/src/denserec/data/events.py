"""Interaction events: parsing, min-count filtering and the time-based split."""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from ..errors import ContractError, DataError

log = logging.getLogger(__name__)

MIN_ITEM_COUNT = 5
MIN_USER_COUNT = 2


class InteractionEvent(NamedTuple):
    user_id: str
    item_id: str
    timestamp: int


def ingest_events(path, max_malformed: int = 0) -> list[InteractionEvent]:
    """Read ``user<TAB>item<TAB>timestamp`` lines, stably sorted by timestamp.

    Malformed lines are logged with their line number; more than
    ``max_malformed`` of them aborts with :class:`DataError`.
    """
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read events file {path}: {exc}") from exc
    events: list[InteractionEvent] = []
    bad: list[int] = []
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            try:
                if len(parts) != 3 or not parts[0] or not parts[1]:
                    raise ValueError("expected three tab-separated fields")
                ts = int(parts[2])
                if ts < 0:
                    raise ValueError("negative timestamp")
            except ValueError as exc:
                bad.append(lineno)
                log.warning("%s:%d: malformed event line (%s)", path, lineno, exc)
                if len(bad) > max_malformed:
                    raise DataError(f"{path}:{lineno}: {len(bad)} malformed lines exceed the limit of {max_malformed}") from exc
                continue
            events.append(InteractionEvent(parts[0], parts[1], ts))
    return sort_events(events)


def sort_events(events: Iterable[InteractionEvent]) -> list[InteractionEvent]:
    # Python's sort is stable, so equal timestamps keep input order
    return sorted(events, key=lambda e: e.timestamp)


def write_events(path, events: Iterable[InteractionEvent]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in events:
            fh.write(f"{e.user_id}\t{e.item_id}\t{e.timestamp}\n")


def min_count_keep_sets(events: list[InteractionEvent], min_item: int = MIN_ITEM_COUNT,
                        min_user: int = MIN_USER_COUNT) -> tuple[set[str], set[str]]:
    """Items and users surviving the iterated min-count filter."""
    items = set(e.item_id for e in events)
    users = set(e.user_id for e in events)
    while True:
        live = [e for e in events if e.item_id in items and e.user_id in users]
        item_counts = Counter(e.item_id for e in live)
        new_items = {i for i, c in item_counts.items() if c >= min_item}
        live = [e for e in live if e.item_id in new_items]
        user_counts = Counter(e.user_id for e in live)
        new_users = {u for u, c in user_counts.items() if c >= min_user}
        if new_items == items and new_users == users:
            return items, users
        items, users = new_items, new_users


def filter_min_counts(events: list[InteractionEvent], min_item: int = MIN_ITEM_COUNT,
                      min_user: int = MIN_USER_COUNT) -> list[InteractionEvent]:
    """Repeatedly drop items with < min_item events and users with < min_user."""
    items, users = min_count_keep_sets(events, min_item, min_user)
    return [e for e in events if e.item_id in items and e.user_id in users]


@dataclass
class TemporalSplit:
    train: list[InteractionEvent]
    valid: list[InteractionEvent]
    test: list[InteractionEvent]
    train_cutoff: int | None
    valid_cutoff: int | None
    degenerate: bool = False


def split_cutoffs(timestamps, train_frac: float, valid_frac: float) -> tuple[int, int]:
    """Lower empirical quantiles: the smallest t with F(t) >= fraction."""
    ts = np.sort(np.asarray(timestamps, dtype=np.int64))
    n = len(ts)

    def lower_quantile(q: float) -> int:
        # tolerance keeps 0.8 + 0.1 from rounding up past an exact rank
        rank = max(1, math.ceil(q * n - 1e-9))
        return int(ts[min(rank, n) - 1])

    return lower_quantile(train_frac), lower_quantile(train_frac + valid_frac)


def temporal_split(events: list[InteractionEvent], train_frac: float = 0.8,
                   valid_frac: float = 0.1) -> TemporalSplit:
    """Partition by global time: train ``t <= c1``, valid ``c1 < t <= c2``, test ``t > c2``."""
    if not (0 < train_frac and valid_frac >= 0 and train_frac + valid_frac < 1):
        raise ContractError(f"invalid split fractions {train_frac}/{valid_frac}")
    if not events:
        return TemporalSplit([], [], [], None, None)
    ts = [e.timestamp for e in events]
    c1, c2 = split_cutoffs(ts, train_frac, valid_frac)
    lo, hi = min(ts), max(ts)
    degenerate = c1 in (lo, hi) or c2 in (lo, hi)
    if degenerate:
        log.warning("degenerate time split: cutoffs %d/%d touch the timestamp range [%d, %d]", c1, c2, lo, hi)
    train = [e for e in events if e.timestamp <= c1]
    valid = [e for e in events if c1 < e.timestamp <= c2]
    test = [e for e in events if e.timestamp > c2]
    return TemporalSplit(train, valid, test, c1, c2, degenerate)
