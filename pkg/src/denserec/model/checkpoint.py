"""Binary checkpoint format.

    b"DREC" | u32 version | u32 len | config text (key=value lines)
    | u32 n_params | per param: u32 name_len, name, u32 rank, u32 extents..., f32 LE data

All integers little-endian. Writes go to a temp file then rename.
"""
from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError, ShapeError
from .config import ModelConfig
from .sasrec import DenseRecModel

MAGIC = b"DREC"
VERSION = 1


def _config_text(model: DenseRecModel, extra: dict | None = None) -> str:
    values = model.config.to_dict()
    values["n_known"] = model.n_known
    values["mode"] = model.mode
    for k, v in (extra or {}).items():
        values[k] = v
    return "".join(f"{k}={v}\n" for k, v in values.items())


def save_checkpoint(model: DenseRecModel, path, extra: dict | None = None) -> Path:
    path = Path(path)
    text = _config_text(model, extra).encode("utf-8")
    params = model.named_parameters()
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(text)))
        fh.write(text)
        fh.write(struct.pack("<I", len(params)))
        for name, p in params:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", p.data.ndim))
            fh.write(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
            fh.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    return path


def _parse(blob: bytes, path: Path):
    if blob[:4] != MAGIC:
        raise DataError(f"{path} is not a checkpoint (bad magic)")
    pos = 4
    version, text_len = struct.unpack_from("<II", blob, pos)
    pos += 8
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    text = blob[pos:pos + text_len].decode("utf-8")
    pos += text_len
    meta = {}
    for line in text.splitlines():
        key, _, value = line.partition("=")
        meta[key] = value
    (count,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    tensors = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        name = blob[pos:pos + n].decode("utf-8")
        pos += n
        (rank,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        shape = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        size = int(np.prod(shape)) if rank else 1
        tensors[name] = np.frombuffer(blob, dtype="<f4", count=size, offset=pos).reshape(shape).copy()
        pos += 4 * size
    return meta, tensors, pos


def read_checkpoint(path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        meta, tensors, pos = _parse(blob, path)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: truncated or corrupt checkpoint ({exc})") from exc
    if pos != len(blob):
        raise DataError(f"{path}: {len(blob) - pos} trailing bytes")
    return meta, tensors


def load_checkpoint(path, precision: str = "float32") -> tuple[DenseRecModel, dict[str, str]]:
    meta, tensors = read_checkpoint(path)
    config = ModelConfig.from_dict(meta)
    config.precision = precision
    n_known = int(meta["n_known"])
    model = DenseRecModel(config, n_known, seed=0, with_projection=meta.get("mode") != "id_only")
    if tensors["item_emb"].shape[0] != n_known + 1:
        raise ShapeError("checkpoint item table does not match its recorded vocabulary size")
    model.load_state_dict(tensors)
    return model, meta
