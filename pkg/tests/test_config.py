import pytest

from denserec.config import dump_run_config, known_keys, load_run_config, parse_config_text
from denserec.errors import ConfigError


def test_defaults():
    cfg = load_run_config()
    assert cfg.model.p_dense == 0.5 and cfg.model.d == 64 and cfg.model.max_len == 30
    assert cfg.train.epochs == 20 and cfg.train.batch_size == 512
    assert cfg.sweep_grid == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    assert 100 in cfg.k and cfg.workers == 1


def test_precedence_flag_over_file_over_default(tmp_path):
    p = tmp_path / "run.conf"
    p.write_text("# comment\nmodel.d = 32\ntrain.epochs = 3  # trailing\nk = 5,50\n")
    cfg = load_run_config(p, {"epochs": "7"})
    assert cfg.model.d == 32 and cfg.train.epochs == 7 and cfg.k == [5, 50]
    assert cfg.train.batch_size == 512


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "run.conf"
    p.write_text("learning_rate_typo = 1\n")
    with pytest.raises(ConfigError, match="unknown key"):
        load_run_config(p)
    with pytest.raises(ConfigError):
        load_run_config(None, {"nope": 1})


def test_malformed_line_rejected():
    with pytest.raises(ConfigError, match=":2:"):
        parse_config_text("a = 1\njust words\n", "x.conf")


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        load_run_config(None, {"p_dense": "1.5"})
    with pytest.raises(ConfigError):
        load_run_config(None, {"mode": "hybrid"})


def test_root_seed_reaches_streams():
    cfg = load_run_config(None, {"seed": "7"})
    assert cfg.train.seed == 7 and cfg.synth.seed == 7
    cfg = load_run_config(None, {"seed": "7", "train.seed": "3"})
    assert cfg.train.seed == 3 and cfg.synth.seed == 7


def test_dump_round_trips(tmp_path):
    cfg = load_run_config(None, {"d": "16", "k": "10", "clip_norm": "5"})
    p = tmp_path / "dump.conf"
    p.write_text(dump_run_config(cfg))
    assert dump_run_config(load_run_config(p)) == dump_run_config(cfg)


def test_known_keys_include_sections():
    keys = known_keys()
    assert {"model.p_dense", "p_dense", "train.lr", "synth.cold_fraction", "out"} <= set(keys)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.conf")
