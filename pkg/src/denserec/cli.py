"""Command-line entry point: ``denserec {synth,prepare,train,eval,sweep}``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import RunConfig, dump_run_config, load_run_config
from .data import generate_synthetic, ingest_events, load_content_embeddings, load_prepared, prepare_dataset
from .data.pipeline import format_stats_table, write_prepared
from .errors import ConfigError, ContractError, DataError, DenseRecError, NumericalError, ShapeError
from .evaluation import format_reports, report_jsonl
from .experiment import build_model, evaluate, format_sweep, sweep_jsonl, sweep_p_dense
from .model import load_checkpoint
from .training import train

log = logging.getLogger("denserec")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
LOG_LEVELS = {"error": logging.ERROR, "warning": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    name = os.environ.get("DENSEREC_LOG", "info").strip().lower()
    level = LOG_LEVELS.get(name, logging.INFO)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("denserec")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def _overrides(args: argparse.Namespace) -> dict:
    values = {}
    for pair in args.set or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {pair!r}")
        values[key.strip()] = value.strip()
    flags = {"seed": args.seed, "mode": args.mode, "p_dense": args.p_dense, "k": args.k, "out": args.out,
             "workers": args.workers, "checkpoint": args.checkpoint, "events": args.events,
             "embeddings": args.embeddings}
    values.update({k: v for k, v in flags.items() if v is not None})
    return values


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _require(path: Path, what: str) -> None:
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")


def _load_data(cfg: RunConfig):
    _require(cfg.prepared_dir / "catalog.tsv", "prepared dataset (run `denserec prepare` first)")
    return load_prepared(cfg.prepared_dir, cfg.model.max_len)


def _load_store(cfg: RunConfig, catalog, dtype, needed: bool):
    if not needed:
        return None
    _require(cfg.embeddings_path, "content embeddings file")
    store, stats = load_content_embeddings(cfg.embeddings_path, catalog, dtype=dtype)
    log.info("content vectors: %d stored, known coverage %.3f, cold coverage %.3f, %d ids not in catalog",
             stats.stored, stats.known_covered, stats.cold_covered, stats.not_in_catalog)
    return store


def cmd_synth(cfg: RunConfig) -> int:
    data = generate_synthetic(cfg.synth)
    paths = data.write(cfg.out_dir)
    print(f"wrote {len(data.events)} events over {cfg.synth.num_items} items to {paths['events']}")
    return EXIT_OK


def cmd_prepare(cfg: RunConfig) -> int:
    _require(cfg.events_path, "events file")
    events = ingest_events(cfg.events_path, cfg.max_malformed)
    data = prepare_dataset(events, cfg.train_frac, cfg.valid_frac, cfg.model.max_len,
                           cfg.min_item_count, cfg.min_user_count)
    write_prepared(data, cfg.prepared_dir)
    _write(cfg.out_dir / "run_config.txt", dump_run_config(cfg))
    print(format_stats_table(data.stats()), end="")
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    data = _load_data(cfg)
    store = _load_store(cfg, data.catalog, cfg.model.dtype, cfg.mode == "denserec")
    if store is not None and store.d_c != cfg.model.d_c:
        # the content width is fixed by the embeddings file, not by the config
        log.info("model.d_c set to %d from the embeddings file (config had %d)", store.d_c, cfg.model.d_c)
        cfg.model.d_c = store.d_c
    model = build_model(cfg.model, data, store, cfg.mode, cfg.train.seed)
    log_path = cfg.out_dir / f"train_log_{cfg.mode}.tsv"
    report, _ = train(model, data.train, cfg.train, checkpoint_path=cfg.checkpoint_path, log_path=log_path)
    final = f"{report.losses[-1]:.6f}" if report.rows else "n/a"
    print(f"trained {cfg.mode} for {len(report.rows)} epochs, final loss {final}; checkpoint {cfg.checkpoint_path}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig) -> int:
    _require(cfg.checkpoint_path, "checkpoint")
    model, meta = load_checkpoint(cfg.checkpoint_path, cfg.model.precision)
    data = _load_data(cfg)
    if model.n_known != data.catalog.n_known:
        raise ShapeError(f"checkpoint was trained on {model.n_known} known items but the prepared "
                         f"catalog has {data.catalog.n_known}")
    if cfg.mode == "denserec" and model.projection is None:
        raise ConfigError(f"checkpoint {cfg.checkpoint_path} has no projection layer; evaluate it with --mode id_only")
    store = _load_store(cfg, data.catalog, model.config.dtype, model.projection is not None)
    if store is not None and store.d_c != model.config.d_c:
        raise ShapeError(f"content vectors have dimension {store.d_c} but the checkpoint expects {model.config.d_c}")
    model.attach_content(store)
    reports = evaluate(model, data, store, cfg.k, cfg.mode, cfg.workers)
    text = format_reports(reports)
    _write(cfg.out_dir / f"eval_{cfg.mode}.txt", text)
    _write(cfg.out_dir / f"eval_{cfg.mode}.jsonl", report_jsonl(reports))
    print(text, end="")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    data = _load_data(cfg)
    store = _load_store(cfg, data.catalog, cfg.model.dtype, True)
    cfg.model.d_c = store.d_c
    rows = sweep_p_dense(cfg.sweep_grid, data, store, cfg.model, cfg.train, cfg.k, cfg.workers)
    text = format_sweep(rows)
    _write(cfg.out_dir / "sweep.tsv", text)
    _write(cfg.out_dir / "sweep.jsonl", sweep_jsonl(rows))
    print(text, end="")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "prepare": cmd_prepare, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--mode", choices=("denserec", "id_only"))
    common.add_argument("--p-dense", type=float, dest="p_dense", metavar="X")
    common.add_argument("--k", metavar="LIST", help="comma-separated cutoffs, e.g. 100,10")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--workers", type=int, metavar="N")
    common.add_argument("--checkpoint", metavar="PATH", help="defaults to OUT/checkpoint_MODE.drec")
    common.add_argument("--events", metavar="PATH", help="defaults to OUT/events.tsv")
    common.add_argument("--embeddings", metavar="PATH", help="defaults to OUT/embeddings.txt")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="any config key; repeatable")

    parser = argparse.ArgumentParser(prog="denserec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synth": "generate a clustered synthetic dataset with cold items",
        "prepare": "filter, split and index an events file",
        "train": "train a model and write a checkpoint",
        "eval": "HitRate@K of a checkpoint on the test split",
        "sweep": "train and evaluate one model per p_dense value",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config, _overrides(args))
        return COMMANDS[args.command](cfg)
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ConfigError, ContractError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (DataError, ShapeError, DenseRecError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
