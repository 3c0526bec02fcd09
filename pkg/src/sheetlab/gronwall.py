"""Two-parameter Gronwall bounds.

Contains the modified Bessel function ``I0`` used as the resolvent of the
constant-kernel Volterra inequality, quadrature checks of the resolvent
equation, the continuous majorant, and the discrete block-induction bound
kept in base-2 logarithms (the perturbation scales involved underflow any
float).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

BESSEL_OVERFLOW_Z = 700.0


def bessel_i0(z: float) -> float:
    """Modified Bessel function of the first kind, order zero, by its power series.

    Terms ``(z^2/4)^k / (k!)^2`` are added until a term falls below
    ``1e-16`` of the partial sum.

    Parameters
    ----------
    z : float
        Nonnegative argument, at most ``BESSEL_OVERFLOW_Z``.

    Returns
    -------
    float
    """
    z = float(z)
    if not z >= 0.0:
        raise ValueError(f"bessel_i0 needs z >= 0, got {z}")
    if z > BESSEL_OVERFLOW_Z:
        raise OverflowError(f"bessel_i0 argument {z} beyond {BESSEL_OVERFLOW_Z}")
    q = 0.25 * z * z
    term = 1.0
    total = 1.0
    k = 0
    while term >= 1e-16 * total:
        k += 1
        term *= q / (k * k)
        total += term
    return total


def _i0_array(z: np.ndarray) -> np.ndarray:
    flat = np.asarray(z, dtype=float).ravel()
    uniq, inverse = np.unique(flat, return_inverse=True)
    vals = np.array([bessel_i0(v) for v in uniq])
    return vals[inverse].reshape(np.shape(z))


def resolvent_h(M: float, xi: float, zeta: float, s: float, t: float) -> float:
    """``I0(2 sqrt(M (s - xi)(t - zeta)))``."""
    if not (0.0 <= xi <= s <= 1.0 and 0.0 <= zeta <= t <= 1.0):
        raise ValueError("resolvent needs 0 <= xi <= s <= 1 and 0 <= zeta <= t <= 1")
    if M < 0:
        raise ValueError("M must be nonnegative")
    return bessel_i0(2.0 * math.sqrt(M * (s - xi) * (t - zeta)))


def verify_resolvent(M: float, N: int) -> float:
    """Residual of ``h = 1 + M * int_{[xi,1]x[zeta,1]} h`` on an ``N`` grid, at ``(s,t) = (1,1)``.

    The inner integral uses the midpoint rule on the cells to the upper
    right of each node.  Returns the maximum absolute defect over nodes.
    """
    if N < 8:
        raise ValueError("N must be at least 8")
    nodes = np.arange(N + 1) / N
    mids = (np.arange(N) + 0.5) / N
    # h at cell midpoints, relative to the corner (1, 1)
    gap = 1.0 - mids
    h_mid = _i0_array(2.0 * np.sqrt(M * np.outer(gap, gap)))
    # tail[i, j] = sum of midpoint values over cells p >= i, q >= j
    tail = np.zeros((N + 1, N + 1))
    tail[:N, :N] = np.cumsum(np.cumsum(h_mid[::-1, ::-1], axis=0), axis=1)[::-1, ::-1]
    corner_gap = 1.0 - nodes
    h_nodes = _i0_array(2.0 * np.sqrt(M * np.outer(corner_gap, corner_gap)))
    residual = h_nodes - 1.0 - M * tail / (N * N)
    return float(np.abs(residual).max())


def continuous_bound(forcing: np.ndarray, M: float) -> np.ndarray:
    """Majorant ``G = F + M * int_{[0,s]x[0,t]} F(xi,zeta) h(xi,zeta,s,t)``.

    ``forcing`` holds ``F`` on the ``(N+1) x (N+1)`` nodes.  The integral is
    a left-endpoint sum over cells, evaluated as a direct 2-D convolution
    with the kernel ``I0(2 sqrt(M a b) / N)`` on lag ``(a, b)``.
    """
    F = np.asarray(forcing, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError("forcing must be a square node array")
    if np.any(F < 0):
        raise ValueError("forcing must be nonnegative")
    N = F.shape[0] - 1
    lags = np.arange(N + 1)
    kernel = _i0_array(2.0 * np.sqrt(M * np.outer(lags, lags)) / N)
    kernel[0, :] = 0.0
    kernel[:, 0] = 0.0
    # G[i,j] - F[i,j] = M/N^2 sum_{p<i,q<j} F[p,q] K[i-p, j-q]
    conv = convolve2d(F, kernel, mode="full")[: N + 1, : N + 1]
    return F + M * conv / (N * N)


def march_linear_volterra(forcing: np.ndarray, M: float) -> np.ndarray:
    """Grid solution of ``u = F + M * Q(u)`` with the solver's left-endpoint rule."""
    F = np.asarray(forcing, dtype=float)
    N = F.shape[0] - 1
    u = np.zeros_like(F)
    S = np.zeros(N + 1)
    for i in range(N + 1):
        u[i] = F[i] + M * S / (N * N)
        R = np.concatenate(([0.0], np.cumsum(u[i, :-1])))
        S = S + R
    return u


@dataclass(frozen=True)
class GronwallTable:
    """Base-2 logarithms of the block bound over ``(k, k') in {1..2^n}^2``."""

    n: int
    d: int
    c1: float
    beta_log2: float
    entries_log2: np.ndarray

    @property
    def growth_log2(self) -> float:
        """log2 of the per-step factor ``3 sqrt(d) (1 + c1 sqrt(dn) 2^-n)``."""
        return math.log2(3.0 * math.sqrt(self.d)) + math.log2(1.0 + self.c1 * math.sqrt(self.d * self.n) * 2.0 ** -self.n)

    def entry(self, k: int, kp: int) -> float:
        return float(self.entries_log2[k - 1, kp - 1])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "k'", "log2_bound"])
            size = self.entries_log2.shape[0]
            for k in range(1, size + 1):
                for kp in range(1, size + 1):
                    w.writerow([k, kp, repr(self.entry(k, kp))])


def discrete_bound_table(n: int, d: int, c1: float, beta_log2: float) -> GronwallTable:
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if c1 < 0:
        raise ValueError("c1 must be nonnegative")
    a = math.log2(3.0 * math.sqrt(d))
    g = math.log2(1.0 + c1 * math.sqrt(d * n) * 2.0**-n)
    k = np.arange(1, 2**n + 1)
    ksum = k[:, None] + k[None, :]
    entries = (ksum - 1) * a + ksum * g + beta_log2
    return GronwallTable(n, d, float(c1), float(beta_log2), entries)


def _icbrt_floor(m: int) -> int:
    """Largest integer r with r**3 <= m."""
    if m < 0:
        raise ValueError("cube root of a negative integer")
    if m < 8:
        return 1 if m else 0
    # integer Newton from above: decreases monotonically to the floor
    r = 1 << ((m.bit_length() + 2) // 3)
    while True:
        nxt = (2 * r + m // (r * r)) // 3
        if nxt >= r:
            return r
        r = nxt


def beta_interval_log2(n: int) -> tuple[int, int]:
    """Outward-rounded integer bounds on ``log2`` of the admissible ``beta(n)``.

    The interval is ``[2^(-4^(3n/4)), 2^(-4^(2n/3))]``.  The lower end uses
    ``-ceil(2^(3n/2))`` and the upper end ``-floor(2^(4n/3))``; both are
    exact integer computations.
    """
    if n < 1:
        raise ValueError("n must be positive")
    e32 = math.isqrt(2 ** (3 * n))
    if e32 * e32 != 2 ** (3 * n):
        e32 += 1
    e43 = _icbrt_floor(2 ** (4 * n))
    return -e32, -e43


def vanishing_exponent(n: int, d: int):
    """``L(n) = 2^(n+1) log2(4 sqrt d) - 4^(2n/3)``.

    Exact (a ``Fraction``) when ``d`` is a power of two and ``2n/3`` is an
    integer; otherwise the power term is replaced by its integer floor,
    which can only make ``L`` larger (outward rounding) and a float is used
    for ``log2(4 sqrt d)`` when ``d`` is not a power of two.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    power = -beta_interval_log2(n)[1]  # floor(2^(4n/3)) = floor(4^(2n/3))
    if d & (d - 1) == 0:
        log_term = Fraction(2) + Fraction(d.bit_length() - 1, 2)
        return Fraction(2 ** (n + 1)) * log_term - power
    return 2 ** (n + 1) * math.log2(4.0 * math.sqrt(d)) - power


@dataclass(frozen=True)
class VanishingReport:
    n_values: list
    L: list
    precondition: list
    n0: int | None
    verdict: bool

    def as_dict(self) -> dict:
        return {
            "n": self.n_values,
            "L": [int(v) if isinstance(v, Fraction) and v.denominator == 1 else float(v) for v in self.L],
            "precondition_ok": self.precondition,
            "n0": self.n0,
            "verdict": self.verdict,
        }


def vanishing_check(n_max: int, d: int, c1: float, n_min: int = 1) -> VanishingReport:
    """Evaluate ``L(n)`` for ``n_min..n_max`` and decide whether it heads to minus infinity.

    ``n0`` is the smallest ``n`` from which ``L`` is strictly decreasing and
    negative through ``n_max``.  The verdict requires such an ``n0`` and a
    final value below -1000.  The precondition ``c1 sqrt(dn) 2^-n <= 1/3``
    is reported for each ``n``.
    """
    ns = list(range(n_min, n_max + 1))
    L = [vanishing_exponent(n, d) for n in ns]
    pre = [c1 * math.sqrt(d * n) * 2.0**-n <= 1.0 / 3.0 for n in ns]
    n0 = None
    for idx in range(len(ns) - 1, -1, -1):
        if L[idx] < 0 and (idx == len(ns) - 1 or L[idx + 1] < L[idx]):
            n0 = ns[idx]
        else:
            break
    verdict = n0 is not None and L[-1] < -1000
    return VanishingReport(ns, L, pre, n0, verdict)
