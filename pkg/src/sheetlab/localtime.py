"""Local time of sheet rows and of the sheet on the plane.

For fixed ``s`` the row ``t -> W(s, t)`` is a Brownian motion with
quadratic-variation rate ``s``.  Occupation densities here are taken with
respect to ``dt`` (so ``int f(W(s,u)) du = int f(x) L(x) dx``), which makes
the Tanaka identity close with the factor ``s/2``.  All time sums use left
endpoints ``t_j < t`` and integer counts, so totals and additivity are exact.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .field import SheetField


@dataclass(frozen=True, eq=False)
class OccupationEstimate:
    x_grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    time_horizon: float
    row_s: float | None = None
    s_horizon: float | None = None
    counts: np.ndarray | None = None

    @property
    def plane(self) -> bool:
        return self.row_s is None

    def total_mass(self) -> float:
        """Riemann sum of the density over a uniform ``x_grid``."""
        dx = float(self.x_grid[1] - self.x_grid[0]) if self.x_grid.size > 1 else 0.0
        return float(np.sum(self.density) * dx)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "density"])
            for x, v in zip(self.x_grid, self.density):
                w.writerow([repr(float(x)), repr(float(v))])


def default_bandwidth(N: int) -> float:
    return N ** -0.25


def _scalar_rows(sheet: SheetField) -> np.ndarray:
    if sheet.dim != 1:
        raise ValueError(f"local time needs a scalar sheet, got d={sheet.dim}")
    return sheet.values[:, :, 0]


def _time_steps(N: int, t: float) -> int:
    """Number of left endpoints ``t_j < t`` (``t`` rounded to the grid)."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("time horizon must lie in [0, 1]")
    return int(round(t * N))


def _counts(rows: np.ndarray, x_grid: np.ndarray, bandwidth: float) -> np.ndarray:
    """``counts[k] = #{nodes : |value - x_k| <= bandwidth}`` via sorted search."""
    v = np.sort(rows.ravel())
    hi = np.searchsorted(v, x_grid + bandwidth, side="right")
    lo = np.searchsorted(v, x_grid - bandwidth, side="left")
    return (hi - lo).astype(np.int64)


def row_local_time(sheet: SheetField, i: int, t: float, x_grid, bandwidth: float | None = None) -> OccupationEstimate:
    """Box-kernel occupation density of row ``i`` up to time ``t``."""
    W = _scalar_rows(sheet)
    N = sheet.n
    if not 0 < i <= N:
        raise ValueError("row index must satisfy 0 < i <= N")
    bw = default_bandwidth(N) if bandwidth is None else float(bandwidth)
    if not bw > 0:
        raise ValueError("bandwidth must be positive")
    x_grid = np.asarray(x_grid, dtype=float)
    jt = _time_steps(N, t)
    counts = _counts(W[i, :jt], x_grid, bw)
    return OccupationEstimate(x_grid, counts / (2.0 * bw * N), bw, t, row_s=i / N, counts=counts)


def plane_local_time(sheet: SheetField, s: float, t: float, x_grid, bandwidth: float | None = None,
                     s_from: float = 0.0) -> OccupationEstimate:
    """Occupation density of the sheet over ``[s_from, s) x [0, t)`` (left-endpoint nodes).

    Equals ``(1/N) sum_i`` of the row estimates over the rows in range.
    """
    W = _scalar_rows(sheet)
    N = sheet.n
    bw = default_bandwidth(N) if bandwidth is None else float(bandwidth)
    if not bw > 0:
        raise ValueError("bandwidth must be positive")
    x_grid = np.asarray(x_grid, dtype=float)
    i0, i1 = _time_steps(N, s_from), _time_steps(N, s)
    if i1 < i0:
        raise ValueError("s must not be below s_from")
    jt = _time_steps(N, t)
    counts = _counts(W[i0:i1, :jt], x_grid, bw)
    return OccupationEstimate(x_grid, counts / (2.0 * bw * N * N), bw, t, s_horizon=s, counts=counts)


def tanaka_residual(sheet: SheetField, i: int, t: float, x: float, bandwidth: float | None = None) -> float:
    """Forward Ito sum of ``1{W <= x} dW`` minus ``(s/2) L(x) - (W(s,t) - x)^- + x^+`` on row ``i``."""
    W = _scalar_rows(sheet)
    N = sheet.n
    row = W[i]
    jt = _time_steps(N, t)
    ito = float(np.sum((row[:jt] <= x) * np.diff(row[: jt + 1])))
    L = row_local_time(sheet, i, t, [x], bandwidth).density[0]
    s = i / N
    end = row[jt]
    return ito - (0.5 * s * L - max(x - end, 0.0) + max(x, 0.0))


@dataclass(frozen=True)
class LtsTerms:
    lhs: float
    forward: float
    reversed_noise: float
    compensator: float

    @property
    def residual(self) -> float:
        return self.lhs - (self.forward + self.reversed_noise + self.compensator)


def lts_formula_terms(sheet: SheetField, f: Callable, df: Callable, coord: int = 0, s: float = 1.0,
                      t: float = 1.0, xi_cut: float = 1 / 16, u_cut: float = 1 / 16) -> LtsTerms:
    """The four integrals of the local-time-space identity on one path.

    ``f(s, t, x)`` and ``df(s, t, x)`` (its derivative in ``x[coord]``) are
    vectorised over leading axes of ``x``.  Rows with ``xi < xi_cut`` and
    times with ``t < u_cut`` (reversed times ``1 - u < u_cut``) are dropped.
    The auxiliary increments on a reversed row are
    ``dB = dW^ + W^ / (1 - u) du``.
    """
    N = sheet.n
    if not (0 < s <= 1 and 0 < t <= 1):
        raise ValueError("s and t must lie in (0, 1]")
    p0 = int(np.ceil(xi_cut * N - 1e-9))
    p1 = _time_steps(N, s)
    j0 = int(np.ceil(u_cut * N - 1e-9))
    j1 = _time_steps(N, t)
    if p1 <= max(p0, 1) or j1 <= j0:
        raise ValueError("cutoffs leave no rows or no times")
    p0 = max(p0, 1)
    h = 1.0 / N
    coords = np.arange(N + 1) / N
    rows = sheet.values[p0:p1, :, :]
    xi = coords[p0:p1]
    tj = coords[j0:j1]
    Wc = sheet.values[p0:p1, j0:j1, coord]
    dW = sheet.values[p0:p1, j0 + 1 : j1 + 1, coord] - Wc

    lhs = h * h * float(np.sum(df(xi[:, None], tj[None, :], rows[:, j0:j1])))

    f_fwd = f(xi[:, None], tj[None, :], rows[:, j0:j1])
    forward = -h * float(np.sum(np.sum(f_fwd * dW, axis=1) / xi))

    # reversed rows: W^(u_k) = W(1 - u_k), k runs over N - j1 .. N - j0 - 1
    k = np.arange(N - j1, N - j0)
    u = k / N
    Wr = sheet.values[p0:p1, N - k, :]
    Wr_next = sheet.values[p0:p1, N - k - 1, coord]
    f_rev = f(xi[:, None], (1.0 - u)[None, :], Wr)
    drift_part = Wr[:, :, coord] / (1.0 - u)[None, :] * h
    dB = (Wr_next - Wr[:, :, coord]) + drift_part
    reversed_noise = -h * float(np.sum(np.sum(f_rev * dB, axis=1) / xi))
    compensator = h * float(np.sum(np.sum(f_rev * drift_part, axis=1) / xi))
    return LtsTerms(lhs, forward, reversed_noise, compensator)


def lts_formula_residual(sheet: SheetField, f: Callable, df: Callable, coord: int = 0, s: float = 1.0,
                         t: float = 1.0, xi_cut: float = 1 / 16, u_cut: float = 1 / 16) -> float:
    """LHS minus RHS of the local-time-space identity for this path."""
    return lts_formula_terms(sheet, f, df, coord, s, t, xi_cut, u_cut).residual


def bump(x: np.ndarray) -> np.ndarray:
    """``exp(-1 / (1 - x^2))`` on ``|x| < 1``, zero outside."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.exp(-1.0 / (1.0 - xi * xi))
    return out


def bump_derivative(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    out = np.zeros_like(x)
    xi = x[inside]
    q = 1.0 - xi * xi
    out[inside] = -2.0 * xi / (q * q) * np.exp(-1.0 / q)
    return out


def coordinate_bump(coord: int = 0, center: float = 0.0, width: float = 1.0):
    """``(f, df)`` for ``f(s, t, x) = bump((x[coord] - center) / width)``."""

    def f(s, t, x):
        return bump((x[..., coord] - center) / width)

    def df(s, t, x):
        return bump_derivative((x[..., coord] - center) / width) / width

    return f, df
