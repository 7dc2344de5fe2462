"""Hot kernels with a compiled backend and a numpy fallback.

The compiled module is used when it was built (``pip install -e .`` runs
Cython); otherwise the numpy versions are picked up transparently. Set
``DENSEREC_KERNELS=python`` to force the fallback.
"""
import os

import numpy as np

from . import _fallback

try:
    if os.environ.get("DENSEREC_KERNELS", "").lower() == "python":
        raise ImportError("fallback forced")
    from . import _core as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def scatter_add_rows(out: np.ndarray, indices: np.ndarray, rows: np.ndarray, backend: str | None = None) -> None:
    indices = np.ascontiguousarray(indices, dtype=np.int64).reshape(-1)
    rows = np.ascontiguousarray(rows, dtype=out.dtype).reshape(len(indices), out.shape[1])
    if (backend or BACKEND) == "cython" and _compiled is not None and out.flags.c_contiguous and out.dtype in (np.float32, np.float64):
        _compiled.scatter_add_rows(out, indices, rows)
    else:
        _fallback.scatter_add_rows(out, indices, rows)


def topk_rows(scores: np.ndarray, k: int, backend: str | None = None) -> np.ndarray:
    scores = np.atleast_2d(scores)
    if k < 1 or k > scores.shape[1]:
        raise ValueError(f"k={k} outside [1, {scores.shape[1]}]")
    if (backend or BACKEND) == "cython" and _compiled is not None and scores.dtype in (np.float32, np.float64):
        return _compiled.topk_rows(np.ascontiguousarray(scores), k)
    return _fallback.topk_rows(scores, k)
