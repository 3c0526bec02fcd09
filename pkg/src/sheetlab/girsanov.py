"""Exponential density of the drifted sheet and the inverse shift.

``log Z_t = sum_{cells, t_q < t} b(X[p, q]) . dX(cell) - 1/2 h^2 sum |b(X[p, q])|^2``

with ``b`` evaluated at the lower-left node of each cell (Ito convention).
Everything stays in log space until a caller asks for ``Z``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .drift import DriftSpec
from .field import GridSpec, SheetField, cell_increment_array, generate_sheet
from .montecarlo import derive_seeds, ordered_map
from .solver import BoundaryTrace, left_quadrature


@dataclass(frozen=True, eq=False)
class DensityTrace:
    t_grid: np.ndarray
    log_z: np.ndarray
    column_terms: np.ndarray

    @property
    def z_values(self) -> np.ndarray:
        return np.exp(self.log_z)

    def log_increment(self, t0: float, t1: float) -> float:
        """``log Z_t1 - log Z_t0`` summed directly over the columns in ``[t0, t1)``."""
        N = self.column_terms.size
        return float(np.sum(self.column_terms[int(round(t0 * N)) : int(round(t1 * N))]))


def column_log_terms(path: SheetField, drift: DriftSpec) -> np.ndarray:
    """Contribution of each column of cells ``q = 0..N-1`` to ``log Z``."""
    N = path.n
    coords = path.grid.coords()
    lower_left = path.values[:N, :N]
    b = drift.evaluate_nodes(coords[:N, None], coords[None, :N], lower_left)
    dX = cell_increment_array(path.values)
    cell = np.sum(b * dX, axis=-1) - 0.5 * (1.0 / (N * N)) * np.sum(b * b, axis=-1)
    terms = cell.sum(axis=0)
    if not np.all(np.isfinite(terms)):
        raise FloatingPointError("non-finite density accumulation")
    return terms


def density_trace(path: SheetField, drift: DriftSpec, t_grid) -> DensityTrace:
    """``log Z_t`` at each ``t`` in ``t_grid`` (rounded to grid columns)."""
    terms = column_log_terms(path, drift)
    cum = np.concatenate(([0.0], np.cumsum(terms)))
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any((t_grid < 0) | (t_grid > 1)):
        raise ValueError("t_grid must lie in [0, 1]")
    idx = np.rint(t_grid * path.n).astype(int)
    return DensityTrace(t_grid, cum[idx], terms)


@dataclass(frozen=True)
class MartingaleReport:
    t_grid: list
    mean: list
    std_err: list
    max_share: list
    samples: int

    @property
    def within(self) -> list:
        out = []
        for m, se in zip(self.mean, self.std_err):
            out.append(abs(m - 1.0) <= 4.0 * se if se > 0 else abs(m - 1.0) <= 1e-12)
        return out

    @property
    def blow_up(self) -> bool:
        return any(s > 0.5 for s in self.max_share)

    @property
    def verdict(self) -> bool:
        return all(self.within) and not self.blow_up

    def as_dict(self) -> dict:
        return {"t": self.t_grid, "EZ": self.mean, "se": self.std_err, "max_share": self.max_share,
                "blow_up": self.blow_up, "samples": self.samples, "verdict": self.verdict}


def martingale_check(drift: DriftSpec, samples: int, t_grid, seed: int, grid_n: int = 64, dim: int = 1,
                     workers: int | None = None) -> MartingaleReport:
    """Monte Carlo ``E[Z_t]`` with raw Brownian sheets as the path."""
    grid = GridSpec(grid_n, dim)
    t_grid = [float(t) for t in t_grid]

    def one(sd):
        return density_trace(generate_sheet(grid, int(sd)), drift, t_grid).log_z

    logz = np.array(ordered_map(one, derive_seeds(seed, samples, stream=3), workers))
    z = np.exp(logz)
    mean = z.mean(axis=0)
    se = z.std(axis=0, ddof=1) / np.sqrt(samples) if samples > 1 else np.zeros_like(mean)
    share = z.max(axis=0) / z.sum(axis=0)
    return MartingaleReport(t_grid, mean.tolist(), se.tolist(), share.tolist(), samples)


def weak_solution_shift(path: SheetField, drift: DriftSpec) -> SheetField:
    """``X - closure(boundary of X) - int int b(X)``, with the solver's quadrature."""
    trace = BoundaryTrace(left=path.values[0], bottom=path.values[:, 0])
    coords = path.grid.coords()
    b = drift.evaluate_nodes(coords[:, None], coords[None, :], path.values)
    return SheetField(path.grid, (path.values - trace.closure()) - left_quadrature(b))
