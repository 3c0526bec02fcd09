"""Path-by-path uniqueness experiments.

Two discrete checks on a single sheet path:

* the difference equation ``u = Q(b(W + u) - b(W))`` with zero boundary is
  iterated from a random interior start and should collapse to ``u = 0``;
* the full equation is solved twice with boundary traces that differ by
  ``beta`` in sup norm, and the block-wise sups of the difference are
  compared with the geometric Gronwall profile in log space.

A discrete run can contradict the continuum statement but never prove it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .averaging import dyadic_points, zero_anchor_scan
from .drift import DriftSpec
from .field import SheetField
from .gronwall import discrete_bound_table
from .solver import BoundaryTrace, left_quadrature, solve_explicit


def collapse_difference(sheet: SheetField, drift: DriftSpec, seed: int, amplitude: float = 1.0,
                        max_iter: int | None = None) -> tuple[float, int]:
    """Iterate ``u <- Q(b(W + u) - b(W))`` from a uniform random interior start.

    Returns ``(sup |u|, iterations)``, where ``iterations`` counts the map
    applications needed to reach a point the map leaves unchanged.  The Volterra structure guarantees this within ``N + 1`` steps.
    """
    rng = np.random.default_rng(seed)
    N = sheet.n
    coords = sheet.grid.coords()
    W = sheet.values
    u = np.zeros_like(W)
    u[1:, 1:] = rng.uniform(-amplitude, amplitude, size=(N, N, sheet.dim))
    base = drift.evaluate_nodes(coords[:, None], coords[None, :], W)
    max_iter = N + 2 if max_iter is None else max_iter
    for it in range(1, max_iter + 1):
        new = left_quadrature(drift.evaluate_nodes(coords[:, None], coords[None, :], W + u) - base)
        if np.array_equal(new, u):
            return float(np.abs(u).max()), it - 1
        u = new
    return float(np.abs(u).max()), max_iter


def random_boundary_pair(grid, beta: float, seed: int, base_level: float = 0.5) -> tuple[BoundaryTrace, BoundaryTrace]:
    """Constant trace ``base_level`` and the same trace plus a random perturbation of sup-norm ``beta``."""
    rng = np.random.default_rng(seed)
    n1, d = grid.n_cells + 1, grid.dim
    left = rng.uniform(-1, 1, size=(n1, d))
    bottom = rng.uniform(-1, 1, size=(n1, d))
    bottom[0] = left[0]
    scale = max(np.abs(left).max(), np.abs(bottom).max())
    base = BoundaryTrace.constant(grid, base_level)
    return base, BoundaryTrace(base.left + beta * left / scale, base.bottom + beta * bottom / scale)


def block_sups(u: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-block sups of ``u^+`` and ``u^-`` over closed node blocks, maxed over components.

    Block ``(k, k')`` (1-based in the returned arrays' order) covers nodes
    ``[(k-1) m, k m] x [(k'-1) m, k' m]`` with ``m = N / 2^n``.
    """
    N = u.shape[0] - 1
    m = N // 2**n
    if m * 2**n != N:
        raise ValueError(f"N={N} is not a multiple of 2^{n}")
    size = 2**n
    upper = np.zeros((size, size))
    lower = np.zeros((size, size))
    pos = np.maximum(u, 0.0).max(axis=-1)
    neg = np.maximum(-u, 0.0).max(axis=-1)
    for k in range(size):
        for kp in range(size):
            sl = (slice(k * m, (k + 1) * m + 1), slice(kp * m, (kp + 1) * m + 1))
            upper[k, kp] = pos[sl].max()
            lower[k, kp] = neg[sl].max()
    return upper, lower


@dataclass
class UniquenessReport:
    n: int
    beta: float
    beta_log2: float
    c1: float
    c2: float
    upper: np.ndarray
    lower: np.ndarray
    observed_log2: np.ndarray
    bound_log2: np.ndarray
    fixed_point_gap: float
    picard_iterations: int
    gap_tol: float = 1e-6

    @property
    def margin(self) -> np.ndarray:
        return self.bound_log2 - self.observed_log2

    @property
    def profile_ok(self) -> bool:
        return bool(np.all(self.margin >= 0))

    @property
    def collapse_ok(self) -> bool:
        return self.fixed_point_gap <= self.gap_tol

    @property
    def verdict(self) -> bool:
        return self.profile_ok and self.collapse_ok

    def as_dict(self) -> dict:
        finite = np.where(np.isfinite(self.observed_log2), self.observed_log2, None)
        return {
            "n": self.n,
            "beta": self.beta,
            "beta_log2": self.beta_log2,
            "c1": self.c1,
            "c2": self.c2,
            "u_upper": self.upper.tolist(),
            "u_lower": self.lower.tolist(),
            "observed_log2": finite.tolist(),
            "bound_log2": self.bound_log2.tolist(),
            "min_margin_log2": float(np.min(self.margin)),
            "fixed_point_gap": self.fixed_point_gap,
            "picard_iterations": self.picard_iterations,
            "collapse_consistent": self.collapse_ok,
            "profile_consistent": self.profile_ok,
            "verdict": self.verdict,
        }


def fitted_c1(sheet: SheetField, drift: DriftSpec, n: int, m_max: int = 4) -> tuple[float, float]:
    """``(C1, C2)``: the zero-anchored constant from a scan and ``C1 = 4 C2``."""
    pts = [p for p in dyadic_points(min(m_max, 4), sheet.dim) if np.any(p != 0)]
    c2 = zero_anchor_scan(sheet, drift, n, pts, extended_log=n >= 5).value
    return 4.0 * c2, c2


def uniqueness_experiment(sheet: SheetField, drift: DriftSpec, n: int, beta: float = 1e-6, seed: int = 0,
                          gap_tol: float = 1e-6, base_level: float = 0.5,
                          backend: str | None = None) -> UniquenessReport:
    """Run both discrete uniqueness checks on one sheet path.

    Raises
    ------
    ValueError
        If the drift is not declared bounded and monotone, or ``N`` is not a
        multiple of ``2^n``.
    """
    if drift.bound is None or not drift.monotone:
        raise ValueError("uniqueness experiment needs a bounded, componentwise nondecreasing drift")
    if sheet.n % 2**n:
        raise ValueError(f"N={sheet.n} is not a multiple of 2^{n}")
    rng = np.random.default_rng(seed)
    seed_guess, seed_trace = (int(v) for v in rng.integers(0, 2**63, size=2))
    gap, iters = collapse_difference(sheet, drift, seed_guess)

    b0, b1 = random_boundary_pair(sheet.grid, beta, seed_trace, base_level)
    X0 = solve_explicit(drift, sheet, b0, backend).values
    X1 = solve_explicit(drift, sheet, b1, backend).values
    upper, lower = block_sups(X1 - X0, n)
    with np.errstate(divide="ignore"):
        observed = np.log2(np.maximum(upper, lower) / beta)
    c1, c2 = fitted_c1(sheet, drift, n)
    table = discrete_bound_table(n, sheet.dim, c1, 0.0)
    return UniquenessReport(n, beta, math.log2(beta), c1, c2, upper, lower, observed,
                            table.entries_log2, gap, iters, gap_tol)
