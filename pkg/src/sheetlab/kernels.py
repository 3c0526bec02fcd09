"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting the environment
variable ``SHEETLAB_BACKEND=python`` forces the numpy fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKEND = "compiled" if _ckernels is not None and os.environ.get("SHEETLAB_BACKEND", "") != "python" else "python"


def available_backends() -> list[str]:
    return ["compiled", "python"] if _ckernels is not None else ["python"]


def _resolve(backend: str | None) -> str:
    backend = backend or BACKEND
    if backend not in ("compiled", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "compiled" and _ckernels is None:
        raise RuntimeError("compiled backend requested but the extension is not built")
    return backend


def march(base: np.ndarray, h2: float, drift, grid_coords: np.ndarray, backend: str | None = None):
    """Explicit solve of ``X = base + h2 * Q(b(X))``; returns ``(X, ok)``."""
    backend = _resolve(backend)
    base = np.ascontiguousarray(base, dtype=np.float64)
    if backend == "compiled":
        code = drift.kernel_code()
        if code is not None:
            kind, param, cvec = code
            level = np.inf if drift.level is None else float(drift.level)
            cvec = np.array(np.broadcast_to(cvec, (base.shape[2],)), dtype=np.float64)
            return _ckernels.march(base, float(h2), kind, float(param), cvec, level)
    t = grid_coords

    def row_drift(i, row):
        return drift.evaluate_nodes(grid_coords[i], t, row)

    return _kernels_py.march(base, h2, row_drift)


def pair_scan(F: np.ndarray, pts: np.ndarray, n: int, backend: str | None = None):
    backend = _resolve(backend)
    F = np.ascontiguousarray(F, dtype=np.float64)
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if backend == "compiled":
        return _ckernels.pair_scan(F, pts, int(n))
    return _kernels_py.pair_scan(F, pts, int(n))
