import numpy as np
import pytest

from denserec.data import SyntheticSpec, generate_synthetic, prepare_dataset
from denserec.experiment import store_for_catalog
from denserec.model import DenseRecModel, ModelConfig


def small_config(**overrides) -> ModelConfig:
    """A 64-bit model small enough for finite differences."""
    values = dict(d=8, d_c=6, num_blocks=1, num_heads=2, max_len=5, dropout_rate=0.0,
                  p_dense=0.5, num_negatives=4, precision="float64")
    values.update(overrides)
    return ModelConfig(**values)


def random_store(n_items: int, d_c: int, seed: int = 0, dtype=np.float64):
    from denserec.data import ContentEmbeddingStore

    rng = np.random.default_rng(seed)
    return ContentEmbeddingStore.from_arrays(rng.standard_normal((n_items, d_c)).astype(dtype))


def small_model(n_known: int = 10, n_items: int = 14, seed: int = 0, with_projection: bool = True, **overrides):
    cfg = small_config(**overrides)
    model = DenseRecModel(cfg, n_known, seed=seed, with_projection=with_projection)
    model.attach_content(random_store(n_items, cfg.d_c, seed, cfg.dtype))
    return model


TINY_SPEC = dict(num_items=60, num_users=400, num_clusters=4, d_c=8, mean_length=6.0)


@pytest.fixture(scope="session")
def tiny():
    """A small prepared synthetic dataset with its content store."""
    syn = generate_synthetic(SyntheticSpec(**TINY_SPEC))
    data = prepare_dataset(syn.events, max_len=10)
    store = store_for_catalog(syn.item_ids, syn.content, data.catalog).astype(np.float32)
    return syn, data, store


def random_examples(n: int, n_known: int, max_len: int, seed: int = 0):
    from denserec.data import SequenceExample

    rng = np.random.default_rng(seed)
    out = []
    for u in range(n):
        length = int(rng.integers(1, max_len + 1))
        out.append(SequenceExample(tuple(int(i) for i in rng.integers(0, n_known, length)),
                                   int(rng.integers(0, n_known)), f"u{u}", "train"))
    return out


def full_model_fd_error(seed: int, n_examples: int = 3) -> float:
    """Worst relative finite-difference error over every parameter of the full loss.

    Path masks and negatives are drawn once and held fixed; dropout is off.
    """
    from denserec.numerics import finite_difference_check
    from denserec.rng import RngStream
    from denserec.training import forward_loss, make_batch

    model = small_model(seed=seed)
    examples = random_examples(n_examples, model.n_known, model.config.max_len, seed)
    batch = make_batch(model, examples, RngStream(seed, "negatives"), RngStream(seed, "path_mask"))
    return finite_difference_check(lambda: forward_loss(model, batch, training=False, dropout_rng=None),
                                   model.parameters(), max_coords=12, seed=seed)
