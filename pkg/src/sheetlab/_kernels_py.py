"""Numpy implementations of the compiled kernels (used when the extension is absent)."""
from __future__ import annotations

from typing import Callable

import numpy as np


def march(base: np.ndarray, h2: float, row_drift: Callable[[int, np.ndarray], np.ndarray]):
    """Row-vectorised version of ``_ckernels.march``.

    ``row_drift(i, row)`` returns the (already truncated) drift on row ``i``.
    """
    n1, m1, d = base.shape
    X = np.empty_like(base)
    S = np.zeros((m1, d))
    R = np.zeros((m1, d))
    ok = True
    for i in range(n1):
        X[i] = base[i] + h2 * S
        if i == n1 - 1:
            break
        b = row_drift(i, X[i])
        if not np.all(np.isfinite(b)):
            ok = False
        R[0] = 0.0
        np.cumsum(b[:-1], axis=0, out=R[1:])
        S = S + R
    return X, ok


def pair_scan(F: np.ndarray, pts: np.ndarray, n: int):
    P = F.shape[0]
    best, bx, by, bb = 0.0, -1, -1, -1
    scale = 2.0 ** (-n)
    for a in range(P - 1):
        r = np.sqrt(np.sum((pts[a] - pts[a + 1 :]) ** 2, axis=1))
        keep = r > 0
        if not keep.any():
            continue
        # log+ term; r >= 1 gives sqrt(-0.0) = -0.0, which adds nothing
        log_term = np.sqrt(-np.log(np.minimum(np.where(keep, r, 1.0), 1.0)))
        denom = scale * (np.sqrt(n) + log_term) * r
        num = np.sqrt(np.sum((F[a][None] - F[a + 1 :]) ** 2, axis=2))
        ratio = np.where(keep[:, None], num / np.where(keep, denom, 1.0)[:, None], 0.0)
        flat = int(np.argmax(ratio))
        c, blk = divmod(flat, ratio.shape[1])
        if ratio[c, blk] > best:
            best, bx, by, bb = float(ratio[c, blk]), a, a + 1 + c, blk
    return best, bx, by, bb
