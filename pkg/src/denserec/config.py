"""Run configuration: one ``key = value`` file, overridable from the command line.

Precedence is flag > file > default. Unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from .data.synthetic import SyntheticSpec
from .errors import ConfigError
from .model.config import ModelConfig, _coerce
from .training import TrainConfig


def _float_list(raw) -> list[float]:
    if isinstance(raw, (list, tuple)):
        return [float(v) for v in raw]
    return [float(v) for v in str(raw).replace(" ", "").split(",") if v]


def _int_list(raw) -> list[int]:
    if isinstance(raw, (list, tuple)):
        return [int(v) for v in raw]
    return [int(v) for v in str(raw).replace(" ", "").split(",") if v]


@dataclass
class RunConfig:
    out: str = "run"
    events: str = ""
    embeddings: str = ""
    checkpoint: str = ""
    mode: str = "denserec"
    seed: int = 0
    workers: int = 1
    train_frac: float = 0.8
    valid_frac: float = 0.1
    min_item_count: int = 5
    min_user_count: int = 2
    max_malformed: int = 0
    k: list = field(default_factory=lambda: [100, 10])
    sweep_grid: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(11)])
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SyntheticSpec = field(default_factory=SyntheticSpec)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def events_path(self) -> Path:
        return Path(self.events) if self.events else self.out_dir / "events.tsv"

    @property
    def embeddings_path(self) -> Path:
        return Path(self.embeddings) if self.embeddings else self.out_dir / "embeddings.txt"

    @property
    def prepared_dir(self) -> Path:
        return self.out_dir / "prepared"

    @property
    def checkpoint_path(self) -> Path:
        return Path(self.checkpoint) if self.checkpoint else self.out_dir / f"checkpoint_{self.mode}.drec"

    def validate(self) -> None:
        if self.mode not in ("denserec", "id_only"):
            raise ConfigError(f"mode must be denserec or id_only, got {self.mode!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.k or min(self.k) < 1:
            raise ConfigError("k list must hold positive integers")
        if not (0 < self.train_frac and self.valid_frac >= 0 and self.train_frac + self.valid_frac < 1):
            raise ConfigError(f"invalid split fractions {self.train_frac}/{self.valid_frac}")
        self.model.validate()
        self.synth.validate()


# key -> (section, attribute); top-level keys map to (None, name)
_SECTIONS = {"model": ModelConfig, "train": TrainConfig, "synth": SyntheticSpec}
_ALIASES = {"synth_seed": ("synth", "seed"), "synth_d_c": ("synth", "d_c"), "train_seed": ("train", "seed")}


def _key_table() -> dict[str, tuple[str | None, str]]:
    table: dict[str, tuple[str | None, str]] = {}
    for f in fields(RunConfig):
        if f.name not in _SECTIONS:
            table[f.name] = (None, f.name)
    for section, cls in _SECTIONS.items():
        for f in fields(cls):
            table.setdefault(f.name, (section, f.name))
            table[f"{section}.{f.name}"] = (section, f.name)
    table.update(_ALIASES)
    return table


def known_keys() -> list[str]:
    return sorted(_key_table())


def apply_overrides(cfg: RunConfig, values: dict, source: str = "config") -> RunConfig:
    table = _key_table()
    for key, raw in values.items():
        norm = key.strip().replace("-", "_")
        if norm not in table:
            raise ConfigError(f"{source}: unknown key {key!r}")
        section, attr = table[norm]
        target = cfg if section is None else getattr(cfg, section)
        current = getattr(target, attr)
        if attr in ("k",):
            value = _int_list(raw)
        elif attr == "sweep_grid":
            value = _float_list(raw)
        elif attr == "clip_norm":
            value = None if str(raw).strip().lower() in ("", "none", "off") else float(raw)
        elif current is None:
            value = raw
        else:
            value = _coerce(raw, type(current))
        setattr(target, attr, value)
    # the root seed drives training and synthesis unless those are set separately
    if "seed" in values:
        if not {"train_seed", "train.seed"} & set(values):
            cfg.train.seed = cfg.seed
        if not {"synth_seed", "synth.seed"} & set(values):
            cfg.synth.seed = cfg.seed
    return cfg


def parse_config_text(text: str, source: str = "config") -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        values[key.strip()] = value.strip()
    return values


def load_run_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    cfg.train.seed = cfg.synth.seed = cfg.seed
    if path:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {p}: {exc}") from exc
        apply_overrides(cfg, parse_config_text(text, str(p)), str(p))
    if overrides:
        apply_overrides(cfg, overrides, "command line")
    cfg.validate()
    return cfg


def dump_run_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        if f.name in _SECTIONS:
            continue
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {','.join(map(str, v)) if isinstance(v, list) else v}")
    for section in _SECTIONS:
        for k, v in dataclasses.asdict(getattr(cfg, section)).items():
            lines.append(f"{section}.{k} = {v}")
    return "\n".join(lines) + "\n"
