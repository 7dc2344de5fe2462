import logging
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from denserec.data import (CatalogIndex, InteractionEvent, SyntheticSpec, build_sequences, filter_min_counts,
                           generate_synthetic, ingest_events, load_content_embeddings, load_prepared,
                           prepare_dataset, sample_negatives, sample_negatives_batch, split_cutoffs,
                           temporal_split, write_embeddings_file, write_prepared)
from denserec.errors import ConfigError, ContractError, DataError
from denserec.model import ModelConfig
from denserec.rng import RngStream


def ev(user, item, ts):
    return InteractionEvent(user, item, ts)


# ingestion

def test_ingest_empty_file(tmp_path):
    p = tmp_path / "e.tsv"
    p.write_text("")
    assert ingest_events(p) == []


def test_ingest_stable_for_equal_timestamps(tmp_path):
    p = tmp_path / "e.tsv"
    p.write_text("u1\tb\t5\nu2\ta\t5\nu3\tc\t1\n")
    assert [e.item_id for e in ingest_events(p)] == ["c", "b", "a"]


def test_ingest_five_line_fixture(tmp_path):
    p = tmp_path / "e.tsv"
    p.write_text("# user\titem\tts\nalice\tbook\t100\nbob\tlamp\t50\nalice\tlamp\t150\ncarol\tbook\t120\nbob\tmug\t200\n")
    assert ingest_events(p) == [ev("bob", "lamp", 50), ev("alice", "book", 100), ev("carol", "book", 120),
                                ev("alice", "lamp", 150), ev("bob", "mug", 200)]


def test_ingest_reports_malformed_line_numbers(tmp_path, caplog):
    p = tmp_path / "e.tsv"
    p.write_text("a\tx\t1\nbroken line\na\ty\tnot-a-number\na\tz\t3\n")
    with caplog.at_level(logging.WARNING):
        events = ingest_events(p, max_malformed=5)
    assert [e.item_id for e in events] == ["x", "z"]
    assert ":2:" in caplog.text and ":3:" in caplog.text


def test_ingest_aborts_past_threshold(tmp_path):
    p = tmp_path / "e.tsv"
    p.write_text("a\tx\t1\nbad\nworse\n")
    with pytest.raises(DataError, match=":3:"):
        ingest_events(p, max_malformed=1)


def test_ingest_missing_file(tmp_path):
    with pytest.raises(DataError):
        ingest_events(tmp_path / "nope.tsv")


# filtering

def _counts_events(item_counts):
    events, ts = [], 0
    for item, n in item_counts.items():
        for j in range(n):
            events.append(ev(f"u{j}", item, ts))
            ts += 1
    return events


def test_filter_drops_item_with_four_interactions():
    out = filter_min_counts(_counts_events({"keep": 5, "also": 5, "drop": 4}))
    assert {e.item_id for e in out} == {"keep", "also"}


def test_filter_drops_user_left_with_one_event():
    events = _counts_events({"a": 5, "b": 3})
    events.append(ev("solo", "a", 99))
    events.append(ev("solo", "b", 100))
    out = filter_min_counts(events)
    # "b" goes, which leaves "solo" with one event
    assert "solo" not in {e.user_id for e in out}


def test_filter_is_a_fixed_point():
    rng = np.random.default_rng(0)
    events = [ev(f"u{rng.integers(40)}", f"i{rng.integers(30)}", t) for t in range(300)]
    once = filter_min_counts(events)
    assert filter_min_counts(once) == once
    items = Counter(e.item_id for e in once)
    users = Counter(e.user_id for e in once)
    assert min(items.values()) >= 5 and min(users.values()) >= 2


# temporal split

def test_split_distinct_timestamps():
    split = temporal_split([ev("u", f"i{t}", t) for t in range(1, 11)], 0.8, 0.1)
    assert [e.timestamp for e in split.train] == list(range(1, 9))
    assert [e.timestamp for e in split.valid] == [9]
    assert [e.timestamp for e in split.test] == [10]
    assert (split.train_cutoff, split.valid_cutoff) == (8, 9)


def test_split_all_equal_timestamps_warns(caplog):
    with caplog.at_level(logging.WARNING):
        split = temporal_split([ev("u", "i", 7)] * 5)
    assert len(split.train) == 5 and not split.valid and not split.test
    assert split.degenerate and "degenerate" in caplog.text


def test_split_rejects_bad_fractions():
    with pytest.raises(ContractError):
        temporal_split([ev("u", "i", 1)], 0.9, 0.2)


def test_split_cutoffs_exact_rank():
    assert split_cutoffs(list(range(10)), 0.8, 0.1) == (7, 8)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=1, max_size=60))
def test_split_partitions_in_time(ts):
    events = [ev(f"u{i % 7}", f"i{i % 5}", t) for i, t in enumerate(ts)]
    split = temporal_split(events, 0.8, 0.1)
    assert sorted(split.train + split.valid + split.test) == sorted(events)
    if split.train and split.test:
        assert max(e.timestamp for e in split.train) < min(e.timestamp for e in split.test)
    if split.train and split.valid:
        assert max(e.timestamp for e in split.train) < min(e.timestamp for e in split.valid)


# sequences

def catalog_for(*ids, n_known=None):
    return CatalogIndex(list(ids), len(ids) if n_known is None else n_known)


def test_train_sequences_every_position():
    cat = catalog_for("a", "b", "c")
    examples, skipped = build_sequences([ev("u", "a", 1), ev("u", "b", 2), ev("u", "c", 3)], cat, 30, "train")
    assert [(e.inputs, e.target) for e in examples] == [((0,), 1), ((0, 1), 2)]
    assert skipped == 0


def test_test_sequence_last_item_only():
    cat = catalog_for("x", "y", "z", n_known=1)
    examples, _ = build_sequences([ev("u", "x", 1), ev("u", "y", 2), ev("u", "z", 3)], cat, 30, "test")
    assert [(e.inputs, e.target, e.split) for e in examples] == [((0, 1), 2, "test")]


def test_truncation_keeps_last_max_len():
    ids = [f"i{j}" for j in range(41)]
    cat = catalog_for(*ids)
    examples, _ = build_sequences([ev("u", i, t) for t, i in enumerate(ids)], cat, 30, "test")
    assert examples[0].inputs == tuple(range(10, 40))


def test_test_user_with_one_event_skipped():
    cat = catalog_for("a", "b")
    examples, skipped = build_sequences([ev("u", "a", 1), ev("v", "a", 2), ev("v", "b", 3)], cat, 30, "test")
    assert len(examples) == 1 and skipped == 1


# negatives

def test_negatives_never_hit_target():
    rng = RngStream(0, "negatives")
    for _ in range(10_000 // 64):
        negs = sample_negatives_batch(np.full(64, 3), 10, 8, rng)
        assert not (negs == 3).any()


def test_negative_default_count():
    assert ModelConfig().num_negatives == 64
    assert sample_negatives(0, 100, 64, RngStream(0, "negatives")).shape == (64,)


def test_negatives_uniform_chi_square():
    rng = RngStream(1, "negatives")
    negs = sample_negatives_batch(np.zeros(20_000, dtype=np.int64), 100, 50, rng)
    counts = np.bincount(negs.ravel(), minlength=100)[1:]
    expected = negs.size / 99
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # 98 degrees of freedom: mean 98, sd 14
    assert abs(chi2 - 98) < 3 * 14
    assert counts.min() > 0 and np.all(np.abs(counts - expected) < 5 * np.sqrt(expected))


def test_negatives_vocab_too_small():
    with pytest.raises(ConfigError):
        sample_negatives(0, 65, 64, RngStream(0, "negatives"))


# content embeddings

def test_load_embeddings_fixture(tmp_path):
    p = tmp_path / "emb.txt"
    write_embeddings_file(p, ["a", "b", "c"], np.arange(12.0).reshape(3, 4))
    store, stats = load_content_embeddings(p, catalog_for("a", "b", "c", n_known=2))
    assert len(store) == 3 and store.d_c == 4
    assert np.array_equal(store[2], [8.0, 9.0, 10.0, 11.0])
    assert stats.known_covered == 1.0 and stats.cold_covered == 1.0


def test_load_embeddings_empty_file(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("")
    store, stats = load_content_embeddings(p, catalog_for("a"))
    assert len(store) == 0 and stats.known_covered == 0.0


def test_load_embeddings_unknown_item_counted(tmp_path):
    p = tmp_path / "emb.txt"
    write_embeddings_file(p, ["a", "zzz"], np.ones((2, 2)))
    store, stats = load_content_embeddings(p, catalog_for("a"))
    assert len(store) == 1 and stats.not_in_catalog == 1


def test_load_embeddings_dimension_mismatch_row(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("denserec-emb 1 3 2\na\t1,2\nb\t1,2,3\nc\t1,2\n")
    with pytest.raises(DataError, match="row 2"):
        load_content_embeddings(p, catalog_for("a", "b", "c"))


def test_load_embeddings_duplicate_last_wins(tmp_path, caplog):
    p = tmp_path / "emb.txt"
    p.write_text("denserec-emb 1 2 2\na\t1,2\na\t3,4\n")
    with caplog.at_level(logging.WARNING):
        store, stats = load_content_embeddings(p, catalog_for("a"))
    assert store[0].tolist() == [3.0, 4.0] and stats.duplicates == 1
    assert "duplicate" in caplog.text


def test_load_embeddings_bad_header(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("hello\n")
    with pytest.raises(DataError, match=":1:"):
        load_content_embeddings(p, catalog_for("a"))


# catalog

def test_catalog_known_first_and_round_trip(tmp_path):
    cat = CatalogIndex.build(["b", "a", "b"], ["c", "a", "d"])
    assert cat.ids == ["a", "b", "c", "d"] and cat.n_known == 2
    cat.save(tmp_path / "catalog.tsv")
    back = CatalogIndex.load(tmp_path / "catalog.tsv")
    assert back.ids == cat.ids and back.n_known == 2


# synthetic generator

def test_synthetic_zero_noise_shares_vectors():
    syn = generate_synthetic(SyntheticSpec(num_items=40, num_users=50, num_clusters=4, noise=0.0, d_c=5))
    for c in range(4):
        vecs = syn.content[syn.clusters == c]
        assert np.all(vecs == vecs[0])


def test_synthetic_no_cold_items():
    syn = generate_synthetic(SyntheticSpec(num_items=40, num_users=300, num_clusters=4, cold_fraction=0.0, d_c=5))
    data = prepare_dataset(syn.events, min_item=1)
    assert data.catalog.n_cold == 0
    assert not syn.cold.any()


def test_synthetic_cold_items_absent_from_training():
    syn = generate_synthetic(SyntheticSpec(num_items=40, num_users=400, num_clusters=4, d_c=5))
    data = prepare_dataset(syn.events)
    cold_ids = {syn.item_ids[i] for i in np.flatnonzero(syn.cold)}
    assert not cold_ids & {e.item_id for e in data.split.train}
    for ex in data.train:
        assert ex.target < data.catalog.n_known


def test_synthetic_cold_target_share_tracks_fraction():
    spec = SyntheticSpec(num_users=10_000, cold_fraction=0.25, d_c=4)
    data = prepare_dataset(generate_synthetic(spec).events)
    share = data.stats()["cold_target_share"]
    assert abs(share - 0.25) < 0.05


def test_synthetic_reproducible():
    spec = SyntheticSpec(num_items=30, num_users=40, num_clusters=3, d_c=4, seed=9)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    assert a.events == b.events and np.array_equal(a.content, b.content)
    c = generate_synthetic(SyntheticSpec(num_items=30, num_users=40, num_clusters=3, d_c=4, seed=10))
    assert not np.array_equal(a.content, c.content)


def test_synthetic_spec_validation():
    with pytest.raises(ConfigError):
        SyntheticSpec(cold_fraction=1.0).validate()
    with pytest.raises(ConfigError):
        SyntheticSpec(num_items=5, num_clusters=6).validate()


# end-to-end preparation

def test_prepare_filters_train_only(tiny):
    syn, data, _ = tiny
    train_counts = Counter(e.item_id for e in data.split.train)
    assert min(train_counts.values()) >= 1
    assert data.catalog.n_cold > 0
    # cold items survive in test even though they were never in train
    assert any(ex.target >= data.catalog.n_known for ex in data.test)


def test_prepare_stats_table_shape(tiny):
    _, data, _ = tiny
    stats = data.stats()
    for key in ("items", "users", "avg_sequence_length", "cold_target_share", "cold_in_test_seqs_share"):
        assert key in stats
    assert stats["train_events"] + stats["valid_events"] + stats["test_events"] >= stats["train_events"]


def test_prepared_round_trip(tiny, tmp_path):
    _, data, _ = tiny
    write_prepared(data, tmp_path)
    back = load_prepared(tmp_path, 10)
    assert back.catalog.ids == data.catalog.ids
    assert back.train == data.train and back.test == data.test
