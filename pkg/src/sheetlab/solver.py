"""Grid solver for ``X = closure(boundary) + W + int int b(X)``.

The double integral is the left-endpoint rectangle rule
``Q(g)[i, j] = h^2 * sum_{p<i, q<j} g[p, q]``.  Each node depends only on
nodes with both indices strictly smaller, so the discrete system is solved
exactly by marching; Picard iteration on the same map has the march result
as its unique fixed point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .drift import DriftSpec, truncate
from .field import GridSpec, SheetField, sup_norm
from .gronwall import bessel_i0


class SolverError(RuntimeError):
    """Raised when the drift produces non-finite values on the grid."""


class ConvergenceError(SolverError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class TruncationError(SolverError):
    """The a-posteriori check found a node where the clamp was active."""


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    left: np.ndarray
    bottom: np.ndarray

    def __post_init__(self):
        left = np.array(self.left, dtype=float, copy=True)
        bottom = np.array(self.bottom, dtype=float, copy=True)
        if left.ndim == 1:
            left = left[:, None]
        if bottom.ndim == 1:
            bottom = bottom[:, None]
        if left.shape != bottom.shape:
            raise ValueError("left and bottom traces must have the same shape")
        if not np.array_equal(left[0], bottom[0]):
            raise ValueError("left[0] must equal bottom[0]")
        left.flags.writeable = False
        bottom.flags.writeable = False
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "bottom", bottom)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "BoundaryTrace":
        z = np.zeros((grid.n_cells + 1, grid.dim))
        return cls(z, z)

    @classmethod
    def constant(cls, grid: GridSpec, value) -> "BoundaryTrace":
        v = np.broadcast_to(np.asarray(value, dtype=float), (grid.n_cells + 1, grid.dim))
        return cls(v, v)

    def closure(self) -> np.ndarray:
        """``bottom[i] + left[j] - left[0]``, with the traces copied verbatim on the axes."""
        c = (self.bottom[:, None, :] + self.left[None, :, :]) - self.left[0]
        c[:, 0, :] = self.bottom
        c[0, :, :] = self.left
        return c


@dataclass(frozen=True, eq=False)
class SolutionField:
    field: SheetField
    scheme: str
    residual: float
    iterations: int
    truncation_n: int | None = None

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def report(self, drift: DriftSpec, sheet: SheetField) -> dict:
        out = {
            "scheme": self.scheme,
            "N": self.field.n,
            "d": self.field.dim,
            "drift": drift.name,
            "residual": self.residual,
            "iterations": self.iterations,
            "truncation_n": self.truncation_n,
            "sup_norm_X": sup_norm(self.field),
        }
        M = drift.growth_constant(sheet.dim)
        out["apriori_bound"] = apriori_bound(M, sup_norm(sheet)) if M else None
        return out


def _check_shapes(sheet: SheetField, boundary: BoundaryTrace) -> None:
    if boundary.left.shape != (sheet.n + 1, sheet.dim):
        raise ValueError(f"boundary of shape {boundary.left.shape} does not fit grid N={sheet.n}, d={sheet.dim}")


def left_quadrature(g: np.ndarray) -> np.ndarray:
    """``h^2 * sum_{p<i, q<j} g[p, q]`` on the node array ``g`` of shape ``(N+1, N+1, d)``.

    Summed along ``q`` first, then ``p``, in increasing order: the same
    order as the marching kernel.
    """
    n = g.shape[0] - 1
    R = np.zeros_like(g)
    np.cumsum(g[:, :-1], axis=1, out=R[:, 1:])
    S = np.zeros_like(g)
    np.cumsum(R[:-1], axis=0, out=S[1:])
    return (1.0 / (n * n)) * S


def _h2(n: int) -> float:
    return 1.0 / (n * n)


def solve_explicit(drift: DriftSpec, sheet: SheetField, boundary: BoundaryTrace | None = None,
                   backend: str | None = None) -> SolutionField:
    """Solve by marching in ``(i, j)`` order.

    Raises
    ------
    SolverError
        If the drift is not finite somewhere on the grid.
    """
    boundary = boundary or BoundaryTrace.zeros(sheet.grid)
    _check_shapes(sheet, boundary)
    base = boundary.closure() + sheet.values
    X, ok = kernels.march(base, _h2(sheet.n), drift, sheet.grid.coords(), backend)
    if not ok or not np.all(np.isfinite(X)):
        raise SolverError("drift evaluation produced non-finite values (blow-up at this grid scale)")
    return SolutionField(SheetField(sheet.grid, X), "explicit", 0.0, 1)


def _apply_map(drift: DriftSpec, base: np.ndarray, X: np.ndarray, coords: np.ndarray) -> np.ndarray:
    b = drift.evaluate_nodes(coords[:, None], coords[None, :], X)
    if not np.all(np.isfinite(b)):
        raise SolverError("drift evaluation produced non-finite values")
    return base + left_quadrature(b)


def solve_picard(drift: DriftSpec, sheet: SheetField, boundary: BoundaryTrace | None = None,
                 tol: float = 1e-12, max_iter: int = 1000, initial: np.ndarray | None = None) -> SolutionField:
    """Fixed-point iteration ``X <- closure + W + Q(b(X))``.

    Starts from ``closure + W`` unless ``initial`` is given.  ``residual`` is
    the sup-node change of the last iteration, which equals the fixed-point
    defect of the returned iterate's predecessor.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    boundary = boundary or BoundaryTrace.zeros(sheet.grid)
    _check_shapes(sheet, boundary)
    base = boundary.closure() + sheet.values
    coords = sheet.grid.coords()
    X = base.copy() if initial is None else np.array(initial, dtype=float)
    residual = math.inf
    for it in range(1, max_iter + 1):
        new = _apply_map(drift, base, X, coords)
        residual = float(np.abs(new - X).max())
        X = new
        if residual <= tol:
            return SolutionField(SheetField(sheet.grid, X), "picard", residual, it)
    raise ConvergenceError(f"Picard iteration did not reach tol={tol} in {max_iter} steps "
                           f"(last residual {residual:.3e})", residual, max_iter)


def truncation_level(M: float, sheet_sup: float) -> int:
    """``ceil((1 + M I0(2 sqrt M))^2 M (1 + sheet_sup))``, at least 1."""
    c1_star = 1.0 + M * bessel_i0(2.0 * math.sqrt(M))
    return max(1, math.ceil(c1_star**2 * M * (1.0 + sheet_sup)))


def apriori_bound(M: float, sheet_sup: float) -> float:
    """``(1 + M I0(2 sqrt M)) (M + sheet_sup)``."""
    if not M > 0:
        raise ValueError("M must be positive")
    return (1.0 + M * bessel_i0(2.0 * math.sqrt(M))) * (M + sheet_sup)


def solve_truncated(drift: DriftSpec, sheet: SheetField, boundary: BoundaryTrace | None = None,
                    backend: str | None = None) -> SolutionField:
    """Solve with the drift clamped at the level implied by its growth constant.

    After solving, every node is checked to see the clamp was never reached,
    so the result also solves the untruncated equation.
    """
    M = drift.growth_constant(sheet.dim)
    if M is None:
        raise ValueError("solve_truncated needs a drift with a declared growth constant")
    n_star = truncation_level(M, sup_norm(sheet)) if M > 0 else 1
    clamped = truncate(drift, n_star)
    sol = solve_explicit(clamped, sheet, boundary, backend)
    coords = sheet.grid.coords()
    b = drift.evaluate_nodes(coords[:, None], coords[None, :], sol.values)
    worst = float(np.abs(b).max())
    if worst > n_star:
        raise TruncationError(f"drift reached {worst:.6g} > truncation level {n_star}")
    return SolutionField(sol.field, "explicit", 0.0, 1, n_star)
