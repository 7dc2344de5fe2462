import json
import subprocess
import sys

import pytest

from denserec.cli import main

SMALL = ["--set", "synth.num_items=60", "--set", "synth.num_users=300", "--set", "synth.num_clusters=4",
         "--set", "synth.d_c=8", "--set", "model.d=16", "--set", "model.max_len=10", "--set", "num_negatives=8",
         "--set", "epochs=2", "--set", "batch_size=64"]


def run(*args):
    return main([str(a) for a in args])


def flow(out, *extra):
    base = ["--out", out, *SMALL, *extra]
    assert run("synth", *base) == 0
    assert run("prepare", *base) == 0
    for mode in ("denserec", "id_only"):
        assert run("train", *base, "--mode", mode) == 0
        assert run("eval", *base, "--mode", mode, "--k", "10,20") == 0


@pytest.fixture(scope="module")
def flows(tmp_path_factory):
    dirs = [tmp_path_factory.mktemp(f"flow{i}") for i in range(2)]
    for d in dirs:
        flow(d)
    return dirs


def test_full_flow_outputs(flows):
    out = flows[0]
    for name in ("events.tsv", "embeddings.txt", "labels.tsv", "run_config.txt", "checkpoint_denserec.drec",
                 "checkpoint_id_only.drec", "train_log_denserec.tsv", "eval_denserec.txt", "eval_id_only.jsonl"):
        assert (out / name).exists(), name
    for name in ("train.tsv", "valid.tsv", "test.tsv", "catalog.tsv", "stats.tsv"):
        assert (out / "prepared" / name).exists(), name


def test_reruns_are_byte_identical(flows):
    a, b = flows
    for path in sorted(a.rglob("*")):
        if path.is_file() and not path.name.startswith("train_log"):
            x, y = path.read_bytes(), (b / path.relative_to(a)).read_bytes()
            if path.name == "run_config.txt":  # echoes the output directory
                x, y = (t.replace(str(d).encode(), b"OUT") for t, d in ((x, a), (y, b)))
            assert x == y, path.name


def test_report_slices_and_structural_misses(flows):
    records = [json.loads(line) for line in (flows[0] / "eval_id_only.jsonl").read_text().splitlines()]
    get = {(r["name"], r["slice"], r["k"]): r for r in records}
    for k in (10, 20):
        assert get[("structural_misses", "all", k)]["value"] == get[("hit_rate", "cold_target", k)]["count"]
        total = get[("hit_rate", "all", k)]["count"]
        assert total == get[("hit_rate", "cold_target", k)]["count"] + get[("hit_rate", "known_target", k)]["count"]
    dense = [json.loads(line) for line in (flows[0] / "eval_denserec.jsonl").read_text().splitlines()]
    assert all(r["value"] == 0 for r in dense if r["name"] == "structural_misses")


def test_labels_echo_cold_fraction(tmp_path):
    assert run("synth", "--out", tmp_path, *SMALL, "--set", "cold_fraction=0.3") == 0
    assert "cold_fraction\t0.3" in (tmp_path / "labels.tsv").read_text()


def test_seed_changes_content_not_schema(tmp_path):
    run("synth", "--out", tmp_path / "a", *SMALL, "--seed", "1")
    run("synth", "--out", tmp_path / "b", *SMALL, "--seed", "2")
    a, b = ((tmp_path / d / "embeddings.txt").read_text().splitlines() for d in "ab")
    assert a[0] == b[0] and a[1:] != b[1:]


def test_missing_events_path_exit_2(tmp_path, capsys):
    assert run("prepare", "--out", tmp_path, "--events", tmp_path / "missing.tsv") == 2
    assert "missing.tsv" in capsys.readouterr().err


def test_unknown_key_exit_2(tmp_path):
    assert run("synth", "--out", tmp_path, "--set", "bogus=1") == 2
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 2


def test_bad_data_exit_3(tmp_path, capsys):
    events = tmp_path / "bad.tsv"
    events.write_text("u\ti\t1\nthis line is broken\n")
    assert run("prepare", "--out", tmp_path, "--events", events) == 3
    assert "bad.tsv:2" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_exit_4(flows, tmp_path):
    import shutil

    shutil.copytree(flows[0] / "prepared", tmp_path / "prepared")
    shutil.copy(flows[0] / "embeddings.txt", tmp_path)
    assert run("train", "--out", tmp_path, *SMALL, "--set", "lr=1e30", "--set", "epochs=5") == 4


def test_eval_dimension_mismatch(flows, tmp_path, capsys):
    import shutil

    import numpy as np

    from denserec.data import read_embeddings_file, write_embeddings_file

    shutil.copytree(flows[0] / "prepared", tmp_path / "prepared")
    _, rows = read_embeddings_file(flows[0] / "embeddings.txt")
    write_embeddings_file(tmp_path / "embeddings.txt", [r[0] for r in rows], np.ones((len(rows), 4)))
    code = run("eval", "--out", tmp_path, "--checkpoint", flows[0] / "checkpoint_denserec.drec", *SMALL)
    assert code == 3 and "checkpoint expects 8" in capsys.readouterr().err


def test_fresh_model_hit_rate_near_k_over_n(tmp_path):
    args = ["--out", tmp_path, "--set", "synth.num_items=1000", "--set", "synth.num_users=3000",
            "--set", "synth.num_clusters=20", "--set", "synth.d_c=8", "--set", "cold_fraction=0",
            "--set", "min_item_count=1", "--set", "model.d=16", "--set", "epochs=0", "--mode", "id_only"]
    assert run("synth", *args) == 0
    assert run("prepare", *args) == 0
    assert run("train", *args) == 0
    assert run("eval", *args, "--k", "100") == 0
    rec = next(json.loads(line) for line in (tmp_path / "eval_id_only.jsonl").read_text().splitlines())
    n_cands = 1000
    assert rec["name"] == "hit_rate" and abs(rec["value"] - 100 / n_cands) < 0.03


def test_default_grid_sweep_has_eleven_rows(flows, tmp_path):
    import shutil

    shutil.copytree(flows[0] / "prepared", tmp_path / "prepared")
    shutil.copy(flows[0] / "embeddings.txt", tmp_path)
    assert run("sweep", "--out", tmp_path, *SMALL, "--set", "epochs=1", "--k", "10") == 0
    lines = (tmp_path / "sweep.tsv").read_text().splitlines()
    assert len(lines) == 12 and lines[1].startswith("0.00\tid_only")
    # the p_dense=0 row is the id_only baseline evaluated the same way
    assert run("train", "--out", tmp_path, *SMALL, "--set", "epochs=1", "--mode", "id_only") == 0
    assert run("eval", "--out", tmp_path, *SMALL, "--mode", "id_only", "--k", "10") == 0
    base = (tmp_path / "eval_id_only.txt").read_text().splitlines()[1].split("\t")
    assert lines[1].split("\t")[2:6] == base[2:6]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "denserec", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("synth", "prepare", "train", "eval", "sweep"):
        assert sub in proc.stdout
