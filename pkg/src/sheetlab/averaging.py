"""The dyadic averaging operator along a sheet path and Monte Carlo checks of its estimates.

For a level ``n`` the unit square splits into ``2^n x 2^n`` blocks; block
``(k, k')`` covers ``s`` in ``(k 2^-n, (k+1) 2^-n]`` and ``t`` in
``(k' 2^-n, (k'+1) 2^-n]``.  The operator is

    rho(x, y) = int_block b(s, t, W + x) - b(s, t, W + y)

computed as ``F(x) - F(y)`` where ``F`` is the left-endpoint sum over the
block nodes, the same rule the solver uses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .drift import DriftSpec, jacobian
from .field import GridSpec, SheetField, generate_sheet, window_increments
from .montecarlo import derive_seeds, mean_and_se, ordered_map


@dataclass(frozen=True)
class DyadicBlock:
    n: int
    k: int
    kp: int

    def __post_init__(self):
        if self.n < 0 or not (0 <= self.k < 2**self.n and 0 <= self.kp < 2**self.n):
            raise ValueError(f"block ({self.k}, {self.kp}) outside level {self.n}")

    def node_slices(self, N: int) -> tuple[slice, slice]:
        m = _block_cells(N, self.n)
        return slice(self.k * m, (self.k + 1) * m), slice(self.kp * m, (self.kp + 1) * m)


@dataclass(frozen=True)
class WindowSpec:
    """Window ``[a', a' + eps'] x [a, a + eps]`` in ``(s, t)``."""

    a: float
    a_prime: float
    eps: float
    eps_prime: float

    def __post_init__(self):
        ok = (0 <= self.a and 0 <= self.a_prime and self.eps > 0 and self.eps_prime > 0
              and self.a + self.eps <= 1 + 1e-12 and self.a_prime + self.eps_prime <= 1 + 1e-12)
        if not ok:
            raise ValueError(f"window {self} does not fit in the unit square")

    def node_range(self, grid: GridSpec) -> tuple[int, int, int, int]:
        """``(i0, j0, i1, j1)``; the window corners must be grid nodes."""
        return (grid.index_of(self.a_prime), grid.index_of(self.a),
                grid.index_of(self.a_prime + self.eps_prime), grid.index_of(self.a + self.eps))


def _block_cells(N: int, n: int) -> int:
    if N % (2**n):
        raise ValueError(f"grid resolution N={N} is not a multiple of 2^{n}")
    return N // 2**n


def block_integrals(sheet: SheetField, drift: DriftSpec, n: int, x) -> np.ndarray:
    """``F[k, k'] = h^2 * sum_{nodes in block} b(s, t, W + x)``, shape ``(2^n, 2^n, d)``."""
    N = sheet.n
    m = _block_cells(N, n)
    x = np.asarray(x, dtype=float).reshape(sheet.dim)
    coords = sheet.grid.coords()[:N]
    b = drift.evaluate_nodes(coords[:, None], coords[None, :], sheet.values[:N, :N] + x)
    blocks = b.reshape(2**n, m, 2**n, m, sheet.dim).sum(axis=(1, 3))
    return blocks * (1.0 / (N * N))


def block_integral(sheet: SheetField, drift: DriftSpec, block: DyadicBlock, x) -> np.ndarray:
    si, ti = block.node_slices(sheet.n)
    N = sheet.n
    coords = sheet.grid.coords()
    x = np.asarray(x, dtype=float).reshape(sheet.dim)
    b = drift.evaluate_nodes(coords[si, None], coords[None, ti], sheet.values[si, ti] + x)
    return b.sum(axis=(0, 1)) * (1.0 / (N * N))


def rho(sheet: SheetField, drift: DriftSpec, block: DyadicBlock, x, y) -> np.ndarray:
    """Averaging operator on one dyadic block."""
    return block_integral(sheet, drift, block, x) - block_integral(sheet, drift, block, y)


def window_integral(sheet: SheetField, drift: DriftSpec, window: WindowSpec, x) -> np.ndarray:
    i0, j0, i1, j1 = window.node_range(sheet.grid)
    coords = sheet.grid.coords()
    N = sheet.n
    x = np.asarray(x, dtype=float).reshape(sheet.dim)
    b = drift.evaluate_nodes(coords[i0:i1, None], coords[None, j0:j1], sheet.values[i0:i1, j0:j1] + x)
    return b.sum(axis=(0, 1)) * (1.0 / (N * N))


def window_rho(sheet: SheetField, drift: DriftSpec, window: WindowSpec, x, y) -> np.ndarray:
    return window_integral(sheet, drift, window, x) - window_integral(sheet, drift, window, y)


@dataclass
class TailReport:
    eta_grid: np.ndarray
    tail_prob: np.ndarray
    std_err: np.ndarray
    alpha_hat: float | None
    c_hat: float | None
    r2: float | None
    samples: int
    retained: np.ndarray = dc_field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def verdict(self) -> bool | None:
        """True/False after a fit; None when the fit was degenerate (inconclusive)."""
        if self.alpha_hat is None:
            return None
        if not self.alpha_hat > 0:
            return False
        envelope = self.c_hat * np.exp(-0.5 * self.alpha_hat * self.eta_grid**2)
        return bool(np.all(self.tail_prob <= envelope))

    def as_dict(self) -> dict:
        return {
            "eta": self.eta_grid.tolist(),
            "p": self.tail_prob.tolist(),
            "se": self.std_err.tolist(),
            "alpha_hat": self.alpha_hat,
            "c_hat": self.c_hat,
            "r2": self.r2,
            "verdict": self.verdict,
        }


def fit_gaussian_tail(eta: np.ndarray, p: np.ndarray, samples: int):
    """Weighted least squares of ``log p`` on ``(1, -eta^2)``.

    Uses points with ``10/samples <= p < 1``, weighted by the inverse
    binomial variance of ``log p``.  Returns ``(alpha, c, r2, mask)`` or
    ``(None, None, None, mask)`` with fewer than two usable points.
    """
    mask = (p >= 10.0 / samples) & (p < 1.0)
    if np.count_nonzero(mask) < 2 or np.ptp(eta[mask]) == 0:
        return None, None, None, mask
    e2 = eta[mask] ** 2
    y = np.log(p[mask])
    w = samples * p[mask] / (1.0 - p[mask])
    A = np.column_stack([np.ones_like(e2), -e2])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    fitted = A @ coef
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = np.sum(w * (y - ybar) ** 2)
    r2 = 1.0 - np.sum(w * (y - fitted) ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[1]), float(math.exp(coef[0])), float(r2), mask


def normalized_window_rho(drift: DriftSpec, window: WindowSpec, x, y, grid: GridSpec, seed: int) -> float:
    """``|rho(x, y)| / (sqrt(eps eps') |x - y|)`` over the window for one fresh sheet."""
    sheet = generate_sheet(grid, int(seed))
    r = window_rho(sheet, drift, window, x, y)
    scale = math.sqrt(window.eps * window.eps_prime) * float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))
    return float(np.linalg.norm(r)) / scale


def tail_estimate(drift: DriftSpec, window: WindowSpec, x, y, samples: int, eta_grid, seed: int,
                  grid_n: int = 64, workers: int | None = None) -> TailReport:
    """Empirical ``P(|rho(x,y)| >= eta sqrt(eps eps') |x-y|)`` on fresh sheets, with a Gaussian-tail fit.

    Raises
    ------
    ValueError
        If the drift is not declared bounded by 1, or ``x == y``.
    """
    if drift.bound is None or drift.bound > 1:
        raise ValueError("tail_estimate needs a drift declared bounded by 1")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.array_equal(x, y):
        raise ValueError("x and y must differ")
    grid = GridSpec(grid_n, x.size)
    seeds = derive_seeds(seed, samples, stream=1)
    ratios = np.array(ordered_map(lambda sd: normalized_window_rho(drift, window, x, y, grid, sd), seeds, workers))
    eta = np.asarray(eta_grid, dtype=float)
    p = np.array([np.count_nonzero(ratios >= e) for e in eta]) / samples
    p = np.minimum.accumulate(p) if np.all(np.diff(eta) >= 0) else p
    se = np.sqrt(p * (1.0 - p) / samples)
    alpha, c, r2, mask = fit_gaussian_tail(eta, p, samples)
    return TailReport(eta, p, se, alpha, c, r2, samples, mask)


def dyadic_points(m_max: int, dim: int) -> np.ndarray:
    """All points of ``[-1, 1]^dim`` whose coordinates are multiples of ``2^-m_max``."""
    if m_max > 4 or dim > 3:
        raise ValueError("dyadic enumeration is capped at m_max <= 4 and d <= 3")
    axis = np.arange(-(2**m_max), 2**m_max + 1) / 2**m_max
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


@dataclass(frozen=True)
class ScanResult:
    value: float
    block: tuple[int, int] | None
    x: list | None
    y: list | None
    log2_value: float | None = None

    def as_dict(self) -> dict:
        return {"value": self.value, "log2_value": self.log2_value, "block": self.block, "x": self.x, "y": self.y}


def modulus_scan(sheet: SheetField, drift: DriftSpec, n: int, m_max: int, backend: str | None = None) -> ScanResult:
    """Path-wise modulus constant: the largest

        |rho(x, y)| / (2^-n (sqrt(n) + sqrt(log+ 1/|x-y|)) |x-y|)

    over all blocks at level ``n`` and dyadic pairs of ``[-1,1]^d`` with
    denominator ``2^m_max``.
    """
    pts = dyadic_points(m_max, sheet.dim)
    F = np.stack([block_integrals(sheet, drift, n, p).reshape(-1, sheet.dim) for p in pts])
    best, ix, iy, blk = kernels.pair_scan(F, pts, n, backend)
    if ix < 0:
        return ScanResult(0.0, None, None, None)
    return ScanResult(float(best), divmod(int(blk), 2**n), pts[ix].tolist(), pts[iy].tolist())


def _log2_sum(a: float, b: float) -> float:
    """``log2(2^a + 2^b)`` without leaving log space."""
    hi, lo = max(a, b), min(a, b)
    return hi + math.log1p(2.0 ** (lo - hi)) / math.log(2.0)


def zero_anchor_scan(sheet: SheetField, drift: DriftSpec, n: int, x_set, extended_log: bool = False) -> ScanResult:
    """Largest ``|rho(0, x)| / (sqrt(n) 2^-n (|x| + 2^(-4^n)))`` over blocks and ``x_set``.

    For ``n >= 5`` the additive term underflows a double, so the ratio is
    formed from base-2 logarithms; pass ``extended_log=True`` to allow it.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n >= 5 and not extended_log:
        raise OverflowError(f"2^(-4^{n}) underflows double precision; use extended_log=True")
    F0 = block_integrals(sheet, drift, n, np.zeros(sheet.dim))
    best_log2 = -math.inf
    arg = None
    tiny_log2 = -(4**n)
    for x in x_set:
        x = np.asarray(x, dtype=float).reshape(sheet.dim)
        r = np.linalg.norm(block_integrals(sheet, drift, n, x) - F0, axis=-1)
        k = np.unravel_index(int(np.argmax(r)), r.shape)
        if r[k] == 0.0:
            continue
        norm_x = float(np.linalg.norm(x))
        denom_log2 = _log2_sum(math.log2(norm_x), tiny_log2) if norm_x > 0 else tiny_log2
        val = math.log2(r[k]) - (0.5 * math.log2(n) - n) - denom_log2
        if val > best_log2:
            best_log2 = val
            arg = (tuple(int(v) for v in k), [0.0] * sheet.dim, x.tolist())
    if arg is None:
        return ScanResult(0.0, None, None, None, -math.inf)
    value = 2.0**best_log2 if best_log2 < 1023 else math.inf
    return ScanResult(value, arg[0], arg[1], arg[2], best_log2)


@dataclass(frozen=True)
class ExpMomentResult:
    eps: float
    eps_prime: float
    estimate: float
    std_err: float
    max_share: float

    @property
    def unstable(self) -> bool:
        return self.max_share > 0.5

    def as_dict(self) -> dict:
        return {"eps": self.eps, "eps_prime": self.eps_prime, "estimate": self.estimate,
                "se": self.std_err, "max_share": self.max_share, "unstable": self.unstable}


def _gradient_average(drift: DriftSpec, increments: np.ndarray) -> np.ndarray:
    """Left-endpoint average of the Jacobian over the rescaled window ``[0,1]^2``."""
    nodes = increments[:-1, :-1]
    cs, ct = nodes.shape[:2]
    s = (np.arange(cs) / cs)[:, None]
    t = (np.arange(ct) / ct)[None, :]
    J = jacobian(drift, s, t, nodes)
    return J.sum(axis=(0, 1)) / (cs * ct)


def exp_moment(drift: DriftSpec, window: WindowSpec, alpha: float, samples: int, seed: int,
               dim: int = 1, grid_n: int = 128, workers: int | None = None) -> ExpMomentResult:
    """Monte Carlo ``E exp(alpha eps eps' |int int grad b(W~)|^2)`` over the window.

    ``W~`` is the rectangle-increment field of the window on a fresh sheet,
    read in rescaled coordinates so the integral runs over the unit square.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    grid = GridSpec(grid_n, dim)
    i0, j0, i1, j1 = window.node_range(grid)
    factor = alpha * window.eps * window.eps_prime

    def one(sd):
        if factor == 0.0:
            return 1.0
        inc = window_increments(generate_sheet(grid, int(sd)), i0, j0, i1, j1)
        g = _gradient_average(drift, inc)
        return math.exp(factor * float(np.sum(g * g)))

    values = np.array(ordered_map(one, derive_seeds(seed, samples, stream=2), workers))
    est, se = mean_and_se(values)
    return ExpMomentResult(window.eps, window.eps_prime, est, se, float(values.max() / values.sum()))


def exp_moment_sweep(drift: DriftSpec, eps_values, alpha: float, samples: int, seed: int,
                     dim: int = 1, a: float = 0.0, a_prime: float = 0.0, grid_n: int = 128,
                     workers: int | None = None) -> list[ExpMomentResult]:
    """``exp_moment`` on square windows ``eps = eps'`` anchored at ``(a', a)``."""
    out = []
    for idx, e in enumerate(eps_values):
        window = WindowSpec(a, a_prime, float(e), float(e))
        out.append(exp_moment(drift, window, alpha, samples, int(derive_seeds(seed, 1, stream=100 + idx)[0]),
                              dim, grid_n, workers))
    return out
