from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import ConfigError


@dataclass
class ModelConfig:
    """Backbone and dual-path settings; defaults are the tuned SASRec values."""

    d: int = 64
    d_c: int = 384
    num_blocks: int = 3
    num_heads: int = 2
    max_len: int = 30
    dropout_rate: float = 0.5
    p_dense: float = 0.5
    num_negatives: int = 64
    use_positional: bool = True
    init_std: float = 0.02
    precision: str = "float32"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.d < 1 or self.d_c < 1:
            raise ConfigError(f"embedding dimensions must be positive (d={self.d}, d_c={self.d_c})")
        if self.num_heads < 1 or self.d % self.num_heads:
            raise ConfigError(f"d={self.d} is not divisible by num_heads={self.num_heads}")
        if self.num_blocks < 0 or self.max_len < 1:
            raise ConfigError("num_blocks must be >= 0 and max_len >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate {self.dropout_rate} outside [0, 1)")
        if not 0.0 <= self.p_dense <= 1.0:
            raise ConfigError(f"p_dense {self.p_dense} outside [0, 1]")
        if self.num_negatives < 1:
            raise ConfigError("num_negatives must be positive")
        if self.precision not in ("float32", "float64"):
            raise ConfigError(f"precision must be float32 or float64, got {self.precision!r}")

    @property
    def dtype(self):
        return np.dtype(self.precision)

    @property
    def head_dim(self) -> int:
        return self.d // self.num_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "ModelConfig":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                continue
            default = getattr(cls, key)
            kwargs[key] = _coerce(raw, type(default))
        return cls(**kwargs)


def _coerce(raw, kind):
    if not isinstance(raw, str):
        return kind(raw)
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot read {raw!r} as a boolean")
    try:
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot read {raw!r} as {kind.__name__}") from exc
