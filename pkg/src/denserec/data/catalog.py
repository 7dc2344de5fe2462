from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import DataError


@dataclass
class CatalogIndex:
    """Bidirectional item id <-> index map.

    Training-vocabulary items occupy indices ``0 .. n_known - 1`` and cold
    items follow, so ``known[i]`` is simply ``i < n_known``. The padding
    token lives outside this map (the model uses -1 in token arrays).
    """

    ids: list[str]
    n_known: int
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {item: i for i, item in enumerate(self.ids)}
        if len(self._index) != len(self.ids):
            raise DataError("catalog item ids must be unique")
        if not 0 <= self.n_known <= len(self.ids):
            raise DataError("n_known outside catalog size")

    @classmethod
    def build(cls, train_items: Iterable[str], other_items: Iterable[str] = ()) -> "CatalogIndex":
        known = sorted(set(train_items))
        known_set = set(known)
        cold = sorted(set(other_items) - known_set)
        return cls(known + cold, len(known))

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._index

    def index(self, item_id: str) -> int:
        return self._index[item_id]

    def get(self, item_id: str, default=None):
        return self._index.get(item_id, default)

    def item_id(self, idx: int) -> str:
        return self.ids[idx]

    def is_known(self, idx) -> np.ndarray | bool:
        return np.asarray(idx) < self.n_known if not isinstance(idx, (int, np.integer)) else idx < self.n_known

    @property
    def known_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.ids), dtype=bool)
        mask[: self.n_known] = True
        return mask

    @property
    def n_cold(self) -> int:
        return len(self.ids) - self.n_known

    def save(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# item_id\tindex\tknown\n")
            for i, item in enumerate(self.ids):
                fh.write(f"{item}\t{i}\t{int(i < self.n_known)}\n")

    @classmethod
    def load(cls, path: Path) -> "CatalogIndex":
        ids, flags = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if line.startswith("#") or not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3 or int(parts[1]) != len(ids):
                    raise DataError(f"{path}:{lineno}: malformed catalog line")
                ids.append(parts[0])
                flags.append(parts[2] == "1")
        n_known = sum(flags)
        if any(flags[n_known:]) or not all(flags[:n_known]):
            raise DataError(f"{path}: known items must precede cold items")
        return cls(ids, n_known)
