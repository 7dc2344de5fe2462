import numpy as np
import pytest

from conftest import random_store, small_config, small_model
from denserec.errors import ConfigError, ContractError, DataError, MissingContentError, ShapeError, VocabularyError
from denserec.model import (DenseRecModel, IdEmbeddingTable, ModelConfig, ProjectionLayer, load_checkpoint,
                            project_content, resolve_embedding, sample_path_mask, save_checkpoint, score_items)
from denserec.model.checkpoint import read_checkpoint
from denserec.model.transformer import TransformerBlockParams, attention_mask, transformer_block_forward
from denserec.numerics import Parameter, Tensor, backward, finite_difference_check, ops
from denserec.rng import RngStream


def test_config_defaults():
    cfg = ModelConfig()
    assert (cfg.d, cfg.num_blocks, cfg.num_heads, cfg.max_len) == (64, 3, 2, 30)
    assert (cfg.dropout_rate, cfg.num_negatives, cfg.use_positional, cfg.p_dense) == (0.5, 64, True, 0.5)


@pytest.mark.parametrize("bad", [dict(d=10, num_heads=3), dict(p_dense=1.5), dict(dropout_rate=1.0), dict(num_negatives=0)])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        ModelConfig(**bad)


def test_config_round_trip_through_text():
    cfg = small_config(use_positional=False)
    back = ModelConfig.from_dict({k: str(v) for k, v in cfg.to_dict().items()})
    assert back == cfg


# projection

def proj_with(W, b):
    proj = ProjectionLayer(W.shape[0], W.shape[1], RngStream(0, "p"), dtype=np.float64)
    proj.W.data[...] = W
    proj.b.data[...] = b
    return proj


def test_project_zero_weights():
    out = project_content(np.ones(3), proj_with(np.zeros((2, 3)), np.zeros(2)))
    assert np.array_equal(out.data, np.zeros(2))


def test_project_identity_plus_bias():
    out = project_content(np.array([1.0, 2.0]), proj_with(np.eye(2), np.array([0.5, -0.5])))
    assert out.data.tolist() == [1.5, 1.5]


def test_project_64x384_oracle():
    rng = np.random.default_rng(0)
    W, b, c = rng.standard_normal((64, 384)), rng.standard_normal(64), rng.standard_normal(384)
    expect = np.array([sum(W[i, t] * c[t] for t in range(384)) for i in range(64)]) + b
    assert np.max(np.abs(project_content(c, proj_with(W, b)).data - expect)) < 1e-12


def test_project_dimension_mismatch():
    with pytest.raises(ShapeError):
        project_content(np.ones(5), proj_with(np.zeros((2, 3)), np.zeros(2)))


def test_projection_linearity():
    rng = np.random.default_rng(1)
    proj = proj_with(rng.standard_normal((4, 6)), rng.standard_normal(4))
    c1, c2 = rng.standard_normal(6), rng.standard_normal(6)
    b = proj.b.data
    lhs = project_content(2.5 * c1 - 0.75 * c2, proj).data - b
    rhs = 2.5 * (project_content(c1, proj).data - b) - 0.75 * (project_content(c2, proj).data - b)
    assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_projection_gradient_reaches_content():
    proj = proj_with(np.random.default_rng(2).standard_normal((3, 4)), np.zeros(3))
    c = Parameter(np.random.default_rng(3).standard_normal(4))
    backward(ops.sum_all(project_content(c, proj)))
    assert np.allclose(c.grad, proj.W.data.sum(axis=0))


# path masks

def test_path_mask_extremes():
    rng = RngStream(0, "path_mask")
    assert not sample_path_mask(50, 0.0, rng).any()
    assert sample_path_mask(50, 1.0, rng).all()


def test_path_mask_fraction():
    frac = sample_path_mask(100_000, 0.5, RngStream(1, "path_mask")).mean()
    assert 0.49 <= frac <= 0.51


def test_path_mask_rejects_bad_p():
    with pytest.raises(ContractError):
        sample_path_mask(3, -0.1, RngStream(0, "x"))


# resolve_embedding

def test_resolve_id_path_bitwise():
    model = small_model()
    out = resolve_embedding(3, False, model.ids, random_store(14, 6), model.projection)
    assert np.array_equal(out.data, model.ids.table.data[4])


def test_resolve_dense_path_equals_projection():
    model = small_model()
    store = random_store(14, 6, seed=4)
    out = resolve_embedding(12, True, model.ids, store, model.projection)
    assert np.array_equal(out.data, project_content(store.matrix[12], model.projection).data)


def test_resolve_unknown_item_on_id_path():
    model = small_model()
    with pytest.raises(VocabularyError):
        resolve_embedding(11, False, model.ids, random_store(14, 6), model.projection)


def test_resolve_missing_content():
    model = small_model()
    store = random_store(14, 6)
    store.mask[5] = False
    with pytest.raises(MissingContentError):
        resolve_embedding(5, True, model.ids, store, model.projection)


def test_dense_path_leaves_id_row_without_gradient():
    model = small_model()
    items = np.array([[2, 5, 2]])
    z = np.array([[True, False, True]])
    backward(ops.sum_all(model.embed(items, z)))
    grad = model.ids.table.grad
    assert not grad[3].any()
    assert grad[6].any()
    assert model.projection.W.grad.any()


def test_padding_row_is_zero_and_pad_reads_it():
    ids = IdEmbeddingTable(5, 4, RngStream(0, "init"), dtype=np.float64)
    assert not ids.table.data[0].any()
    assert np.array_equal(ids.rows_for(np.array([-1, 0, 4])), [0, 1, 5])


# encoder

def test_single_item_sequence_ignores_other_rows():
    model = small_model()
    h = model.encode_sequence([4])
    model.ids.table.data[[1, 2, 3]] += 5.0
    assert np.array_equal(model.encode_sequence([4]), h)


def test_causal_probe():
    model = small_model()
    tokens = np.array([[1, 2, 3, 4, 5]])
    before = model.encode(tokens, return_all=True).data
    after = model.encode(np.array([[1, 2, 3, 9, 0]]), return_all=True).data
    assert np.array_equal(before[0, :3], after[0, :3])
    assert not np.allclose(before[0, 3], after[0, 3])


@pytest.mark.parametrize("seed", range(5))
def test_causality_arbitrary_future_changes(seed):
    model = small_model(seed=seed, num_blocks=2)
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 10, size=(1, 5))
    t = int(rng.integers(0, 4))
    other = base.copy()
    other[0, t + 1:] = rng.integers(0, 10, size=4 - t)
    a = model.encode(base, return_all=True).data[0, :t + 1]
    b = model.encode(other, return_all=True).data[0, :t + 1]
    assert np.array_equal(a, b)


def test_padding_does_not_affect_last_output():
    model = small_model()
    a = model.encode(np.array([[-1, -1, 3, 7]])).data
    b = model.encode(np.array([[-1, -1, -1, 3, 7]])).data
    # moving the pad boundary changes neither real tokens nor their positions
    assert np.allclose(a, b, atol=1e-12)
    model.pos_emb.data[0] += 3.0
    c = model.encode(np.array([[-1, -1, -1, 3, 7]])).data
    assert np.allclose(b, c, atol=1e-12)


def test_eval_mode_is_deterministic():
    model = small_model(dropout_rate=0.5)
    a = model.encode_sequence([1, 2, 3])
    assert np.array_equal(a, model.encode_sequence([1, 2, 3]))


def test_train_mode_dropout_repeats_with_same_stream():
    model = small_model(dropout_rate=0.5)
    tokens = np.array([[1, 2, 3]])
    a = model.encode(tokens, training=True, rng=RngStream(0, "dropout")).data
    b = model.encode(tokens, training=True, rng=RngStream(0, "dropout")).data
    assert np.array_equal(a, b)
    assert not np.array_equal(a, model.encode(tokens).data)


def test_empty_sequence_is_contract_error():
    with pytest.raises(ContractError):
        small_model().encode_sequence([])


def test_long_sequence_left_truncated():
    model = small_model()
    long = [1, 2, 3, 4, 5, 6, 7, 8]
    assert np.array_equal(model.encode_sequence(long), model.encode_sequence(long[-5:]))


def test_zero_input_gives_uniform_causal_attention(monkeypatch):
    captured = []
    original = ops.softmax_rows

    def spy(x, mask=None):
        out = original(x, mask)
        captured.append(out.data)
        return out

    monkeypatch.setattr(ops, "softmax_rows", spy)
    params = TransformerBlockParams(4, 2, RngStream(0, "b"), np.float64)
    tokens = np.array([[1, 2, 3]])
    transformer_block_forward(Tensor(np.zeros((1, 3, 4))), params, attention_mask(tokens, 2), np.ones((1, 3, 1)))
    expect = np.tril(np.ones((3, 3))) / np.arange(1, 4)[:, None]
    assert np.allclose(captured[0][0], expect) and np.allclose(captured[0][1], expect)


def test_block_fd():
    params = TransformerBlockParams(8, 2, RngStream(1, "b"), np.float64)
    H = Parameter(np.random.default_rng(0).standard_normal((2, 4, 8)))
    tokens = np.array([[-1, 1, 2, 3], [1, 2, 3, 4]])
    mask = attention_mask(tokens, 2)
    timeline = (tokens >= 0)[:, :, None].astype(float)
    w = np.random.default_rng(1).standard_normal((2, 8))

    def f():
        return ops.sum_all(ops.mul(ops.select_last(transformer_block_forward(H, params, mask, timeline)), w))

    assert finite_difference_check(f, [H] + params.parameters(), max_coords=12) < 1e-4


def test_score_items():
    e = np.random.default_rng(0).standard_normal((5, 3))
    assert np.array_equal(score_items(np.array([0.0, 1.0, 0.0]), e), e[:, 1])
    assert score_items(np.array([1.0, 0.0]), np.array([[0.0, 2.0]]))[0] == 0.0
    h = np.random.default_rng(1).standard_normal(3)
    assert np.allclose(score_items(h, e), [sum(h[t] * row[t] for t in range(3)) for row in e], atol=1e-12)


def test_id_only_model_has_no_projection():
    model = DenseRecModel(small_config(), 10, with_projection=False)
    assert model.mode == "id_only" and model.projection is None
    assert not any(name.startswith("proj") for name, _ in model.named_parameters())


def test_init_is_shared_between_modes():
    a = DenseRecModel(small_config(), 10, seed=3)
    b = DenseRecModel(small_config(), 10, seed=3, with_projection=False)
    sb = b.state_dict()
    for name, value in sb.items():
        assert np.array_equal(a.state_dict()[name], value)


# checkpoint

def test_checkpoint_round_trip_bitwise(tmp_path):
    model = small_model(precision="float32")
    save_checkpoint(model, tmp_path / "m.drec")
    loaded, meta = load_checkpoint(tmp_path / "m.drec")
    loaded.attach_content(random_store(14, 6, dtype=np.float32))
    model.attach_content(random_store(14, 6, dtype=np.float32))
    assert meta["mode"] == "denserec" and int(meta["n_known"]) == 10
    for name, value in model.state_dict().items():
        assert np.array_equal(loaded.state_dict()[name], value)
    z = np.array([[False, True, False]])
    assert np.array_equal(model.encode(np.array([[1, 12, 3]]), z).data, loaded.encode(np.array([[1, 12, 3]]), z).data)


def test_checkpoint_layout(tmp_path):
    model = small_model(precision="float32")
    path = save_checkpoint(model, tmp_path / "m.drec")
    blob = path.read_bytes()
    assert blob[:4] == b"DREC"
    assert int.from_bytes(blob[4:8], "little") == 1
    meta, tensors = read_checkpoint(path)
    assert meta["d"] == "8" and tensors["item_emb"].shape == (11, 8)
    assert list(tensors) == [n for n, _ in model.named_parameters()]


def test_checkpoint_write_is_atomic(tmp_path, monkeypatch):
    model = small_model(precision="float32")
    path = tmp_path / "m.drec"
    save_checkpoint(model, path)
    good = path.read_bytes()

    def boom(*a, **k):
        raise OSError("disk full")

    import denserec.model.checkpoint as ck
    monkeypatch.setattr(ck.os, "replace", boom)
    model.pos_emb.data += 1
    with pytest.raises(OSError):
        save_checkpoint(model, path)
    assert path.read_bytes() == good


def test_checkpoint_bad_magic(tmp_path):
    p = tmp_path / "x.drec"
    p.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(DataError):
        read_checkpoint(p)


def test_checkpoint_truncated(tmp_path):
    model = small_model(precision="float32")
    path = save_checkpoint(model, tmp_path / "m.drec")
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(DataError, match="truncated"):
        read_checkpoint(path)
