"""Clustered synthetic interaction logs with content vectors and cold items.

Items belong to clusters and carry a content vector ``centroid + noise``.
Each user walks a cluster-level Markov chain and, at every step, picks an
item of the current cluster with Zipf-like popularity. A ``cold_fraction``
of every cluster's items is held back until after the training cutoff, so
those items never occur in training data.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..rng import RngStream
from .content import write_embeddings_file
from .events import InteractionEvent, sort_events, split_cutoffs, write_events


@dataclass
class SyntheticSpec:
    num_items: int = 200
    num_users: int = 5000
    num_clusters: int = 10
    cold_fraction: float = 0.25
    noise: float = 0.3
    concentration: float = 0.05
    seed: int = 0
    d_c: int = 32
    mean_length: float = 8.0
    popularity_exponent: float = 0.5
    train_frac: float = 0.8
    valid_frac: float = 0.1
    horizon: int = 10_000_000

    def validate(self) -> None:
        if not 0.0 <= self.cold_fraction < 1.0:
            raise ConfigError(f"cold_fraction {self.cold_fraction} outside [0, 1)")
        if not 1 <= self.num_clusters <= self.num_items:
            raise ConfigError("need 1 <= num_clusters <= num_items")
        if self.num_users < 1 or self.d_c < 1 or self.mean_length < 2:
            raise ConfigError("num_users, d_c must be positive and mean_length >= 2")
        if self.noise < 0 or self.concentration <= 0:
            raise ConfigError("noise must be >= 0 and concentration > 0")


@dataclass
class SyntheticData:
    events: list[InteractionEvent]
    item_ids: list[str]
    content: np.ndarray
    clusters: np.ndarray
    cold: np.ndarray
    train_cutoff: int
    transitions: np.ndarray = field(repr=False)
    spec: SyntheticSpec | None = None

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"events": out / "events.tsv", "embeddings": out / "embeddings.txt", "labels": out / "labels.tsv"}
        write_events(paths["events"], self.events)
        write_embeddings_file(paths["embeddings"], self.item_ids, self.content)
        with open(paths["labels"], "w", encoding="utf-8", newline="\n") as fh:
            if self.spec is not None:
                for key, value in dataclasses.asdict(self.spec).items():
                    fh.write(f"# {key}\t{value}\n")
            fh.write("# item_id\tcluster\tcold\n")
            for item, c, cold in zip(self.item_ids, self.clusters, self.cold):
                fh.write(f"{item}\t{int(c)}\t{int(cold)}\n")
        return paths


def _zipf_weights(n: int, exponent: float, rng: RngStream) -> np.ndarray:
    w = 1.0 / (np.arange(1, n + 1) ** exponent)
    w = w[rng.permutation(n)]
    return w / w.sum()


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    spec.validate()
    rng = RngStream(spec.seed, "synth")
    n, C = spec.num_items, spec.num_clusters
    width = len(str(n - 1))
    item_ids = [f"item{i:0{width}d}" for i in range(n)]

    clusters = np.empty(n, dtype=np.int64)
    clusters[rng.permutation(n)] = np.arange(n) % C
    cold = np.zeros(n, dtype=bool)
    members = [np.flatnonzero(clusters == c) for c in range(C)]
    for m in members:
        n_cold = int(round(spec.cold_fraction * len(m)))
        n_cold = min(n_cold, len(m) - 1)
        if n_cold > 0:
            cold[rng.generator.choice(m, n_cold, replace=False)] = True

    centroids = rng.normal((C, spec.d_c))
    content = centroids[clusters] + spec.noise * rng.normal((n, spec.d_c))

    transitions = rng.generator.dirichlet(np.full(C, spec.concentration), size=C)
    warm_members = [m[~cold[m]] for m in members]
    cold_members = [m[cold[m]] for m in members]
    warm_w = [_zipf_weights(len(m), spec.popularity_exponent, rng) for m in warm_members]
    cold_w = [_zipf_weights(len(m), spec.popularity_exponent, rng) if len(m) else None for m in cold_members]

    # timestamps first, so the cutoff is known before items are chosen
    lengths = 2 + rng.generator.poisson(spec.mean_length - 2, size=spec.num_users)
    starts = rng.integers(0, spec.horizon, size=spec.num_users)
    mean_gap = spec.horizon * 0.002
    user_times = []
    for u in range(spec.num_users):
        gaps = np.floor(rng.generator.exponential(mean_gap, size=lengths[u] - 1)).astype(np.int64) + 1
        user_times.append(starts[u] + np.concatenate([[0], np.cumsum(gaps)]))
    all_ts = np.concatenate(user_times)
    cutoff, _ = split_cutoffs(all_ts, spec.train_frac, spec.valid_frac)

    events = []
    for u in range(spec.num_users):
        c = int(rng.integers(0, C))
        for t_idx, ts in enumerate(user_times[u]):
            if t_idx:
                c = int(rng.generator.choice(C, p=transitions[c]))
            use_cold = ts > cutoff and len(cold_members[c]) > 0 and rng.uniform(None) < spec.cold_fraction
            if use_cold:
                item = int(rng.generator.choice(cold_members[c], p=cold_w[c]))
            else:
                item = int(rng.generator.choice(warm_members[c], p=warm_w[c]))
            events.append(InteractionEvent(f"user{u}", item_ids[item], int(ts)))
    return SyntheticData(sort_events(events), item_ids, content, clusters, cold, int(cutoff), transitions, spec)
