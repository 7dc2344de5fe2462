from .catalog import CatalogIndex
from .content import ContentEmbeddingStore, CoverageStats, load_content_embeddings, read_embeddings_file, write_embeddings_file
from .events import (InteractionEvent, TemporalSplit, filter_min_counts, ingest_events, min_count_keep_sets,
                     sort_events, split_cutoffs, temporal_split, write_events)
from .pipeline import PreparedData, dataset_stats, format_stats_table, load_prepared, prepare_dataset, write_prepared
from .sequences import SequenceExample, build_sequences, sample_negatives, sample_negatives_batch, user_sequences
from .synthetic import SyntheticData, SyntheticSpec, generate_synthetic

__all__ = [
    "CatalogIndex", "ContentEmbeddingStore", "CoverageStats", "load_content_embeddings", "read_embeddings_file",
    "write_embeddings_file", "InteractionEvent", "TemporalSplit", "filter_min_counts", "ingest_events",
    "min_count_keep_sets", "sort_events", "split_cutoffs", "temporal_split", "write_events", "PreparedData",
    "dataset_stats", "format_stats_table", "load_prepared", "prepare_dataset", "write_prepared", "SequenceExample",
    "build_sequences", "sample_negatives", "sample_negatives_batch", "user_sequences", "SyntheticData",
    "SyntheticSpec", "generate_synthetic",
]
