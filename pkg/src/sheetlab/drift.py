"""Drift functions ``b(s, t, x)`` with declared structural hypotheses.

Every drift carries three declarations: a sup bound ``bound`` (largest
component magnitude), a linear-growth constant ``growth_M`` with
``|b(s,t,x)| <= M (1 + |x|)`` in the Euclidean norm, and a flag saying
whether each component is nondecreasing in every coordinate of ``x``.
The audits below test these declarations on random samples; they never
infer them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

KINDS = ("zero", "constant", "identity", "componentwise_sign", "componentwise_tanh", "linear", "custom")

# codes understood by the compiled march kernel
_KERNEL_CODES = {"zero": 0, "constant": 1, "identity": 2, "linear": 2, "componentwise_sign": 3, "componentwise_tanh": 4}


@dataclass(frozen=True)
class DriftSpec:
    """An autonomous or space-time drift together with its declared flags.

    Attributes
    ----------
    kind : str
        One of ``KINDS``.
    params : tuple
        Constant vector for ``constant``, ``(scale,)`` for tanh, ``(M,)`` for linear.
    bound : float or None
        Declared ``max_i |b_i|`` over all inputs.
    growth_M : float or None
        Declared linear-growth constant.
    monotone : bool
        Declared componentwise nondecreasing in ``x``.
    level : float or None
        Clamp level when the drift is a truncation of ``base``.
    """

    kind: str
    params: tuple = ()
    bound: float | None = None
    growth_M: float | None = None
    monotone: bool = False
    func: Callable | None = None
    jac: Callable | None = None
    level: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown drift kind {self.kind!r}")

    def kernel_code(self):
        """``(code, param, const_vector)`` for the compiled march, or None."""
        if self.kind == "custom":
            return None
        code = _KERNEL_CODES[self.kind]
        param = 1.0
        cvec = np.zeros(1)
        if self.kind == "constant":
            cvec = np.asarray(self.params, dtype=float)
        elif self.kind in ("componentwise_tanh", "linear"):
            param = float(self.params[0])
        return code, param, cvec

    def growth_constant(self, dim: int) -> float | None:
        """Declared ``growth_M``, or ``bound * sqrt(dim)`` for a bounded drift."""
        if self.growth_M is not None:
            return self.growth_M
        if self.bound is not None:
            return self.bound * math.sqrt(dim)
        return None

    def raw(self, s, t, x: np.ndarray) -> np.ndarray:
        """Untruncated drift on an array ``x`` of shape ``(..., d)``."""
        kind = self.kind
        if kind == "zero":
            return np.zeros_like(x)
        if kind == "constant":
            c = np.asarray(self.params, dtype=float)
            if c.shape[0] != x.shape[-1]:
                raise ValueError(f"constant drift has dimension {c.shape[0]}, input has {x.shape[-1]}")
            return np.broadcast_to(c, x.shape).copy()
        if kind == "identity":
            return np.array(x, dtype=float, copy=True)
        if kind == "linear":
            return self.params[0] * x
        if kind == "componentwise_sign":
            return np.sign(x)
        if kind == "componentwise_tanh":
            return np.tanh(self.params[0] * x)
        s_arr = np.broadcast_to(np.asarray(s, dtype=float), x.shape[:-1])
        t_arr = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
        out = np.asarray(self.func(s_arr, t_arr, x), dtype=float)
        return np.broadcast_to(out, x.shape).copy() if out.shape != x.shape else out

    def evaluate_nodes(self, s, t, x: np.ndarray) -> np.ndarray:
        """Drift (with truncation applied) on many nodes at once, no input checks."""
        out = self.raw(s, t, x)
        if self.level is not None:
            np.clip(out, -self.level, self.level, out=out)
        return out


def zero() -> DriftSpec:
    return DriftSpec("zero", (), bound=0.0, growth_M=0.0, monotone=True, name="zero")


def constant(c) -> DriftSpec:
    c = tuple(float(v) for v in np.atleast_1d(c))
    return DriftSpec("constant", c, bound=max(abs(v) for v in c), growth_M=math.hypot(*c),
                     monotone=True, name="const:" + ",".join(repr(v) for v in c))


def identity() -> DriftSpec:
    return DriftSpec("identity", (), bound=None, growth_M=1.0, monotone=True, name="identity")


def linear(M: float) -> DriftSpec:
    M = float(M)
    return DriftSpec("linear", (M,), bound=None, growth_M=abs(M), monotone=M >= 0, name=f"linear:{M!r}")


def componentwise_sign() -> DriftSpec:
    return DriftSpec("componentwise_sign", (), bound=1.0, monotone=True, name="sign")


def componentwise_tanh(scale: float = 1.0) -> DriftSpec:
    """``b_i(x) = tanh(scale * x_i)``."""
    scale = float(scale)
    return DriftSpec("componentwise_tanh", (scale,), bound=1.0 if scale else 0.0,
                     monotone=scale >= 0, name=f"tanh:{scale!r}")


def custom(func: Callable, *, bound: float | None = None, growth_M: float | None = None,
           monotone: bool = False, jac: Callable | None = None, name: str = "custom") -> DriftSpec:
    """Wrap ``func(s, t, x) -> b`` (vectorised over leading axes of ``x``).

    Flags must be declared by the caller.
    """
    return DriftSpec("custom", (), bound=bound, growth_M=growth_M, monotone=monotone,
                     func=func, jac=jac, name=name)


def evaluate(drift: DriftSpec, s: float, t: float, x) -> np.ndarray:
    """``b(s, t, x)`` for a single point; raises ``ValueError`` on bad input."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError("x must be a single d-vector")
    if not (np.all(np.isfinite(x)) and math.isfinite(s) and math.isfinite(t)):
        raise ValueError("non-finite input to drift")
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        raise ValueError(f"(s, t) = ({s}, {t}) outside the unit square")
    return drift.evaluate_nodes(s, t, x)


def jacobian(drift: DriftSpec, s, t, x: np.ndarray) -> np.ndarray:
    """Jacobian ``d b_i / d x_j`` with shape ``x.shape + (d,)``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    kind = drift.kind
    if kind in ("zero", "constant"):
        return np.zeros(x.shape + (d,))
    if kind == "componentwise_sign":
        raise ValueError("componentwise_sign has no Jacobian")
    if kind in ("identity", "linear"):
        m = 1.0 if kind == "identity" else drift.params[0]
        J = np.zeros(x.shape + (d,))
        J[..., np.arange(d), np.arange(d)] = m
    elif kind == "componentwise_tanh":
        a = drift.params[0]
        J = np.zeros(x.shape + (d,))
        J[..., np.arange(d), np.arange(d)] = a / np.cosh(a * x) ** 2
    else:
        if drift.jac is None:
            raise ValueError("custom drift declared without a Jacobian")
        J = np.asarray(drift.jac(s, t, x), dtype=float)
    if drift.level is not None:
        active = np.abs(drift.raw(s, t, x)) < drift.level
        J = J * active[..., :, None]
    return J


def truncate(drift: DriftSpec, n: float) -> DriftSpec:
    """Clamp every component of ``b`` to ``[-n, n]``.

    Monotonicity and the growth constant carry over; the new bound is
    ``min(n, bound)``.  Repeated truncation keeps the smallest level.
    """
    if not n >= 1:
        raise ValueError(f"truncation level must be >= 1, got {n}")
    level = float(n) if drift.level is None else min(drift.level, float(n))
    bound = level if drift.bound is None else min(level, drift.bound)
    return replace(drift, level=level, bound=bound, name=f"{drift.name}|clamp:{level!r}")


@dataclass(frozen=True)
class HypothesisReport:
    tested_pairs: int
    violations: int
    worst_margin: float
    worst_ratio: float | None = None

    @property
    def verdict(self) -> bool:
        return self.violations == 0


def check_monotone(drift: DriftSpec, trials: int = 1000, seed: int = 0, dim: int = 1,
                   radius: float = 10.0) -> HypothesisReport:
    """Audit ``x <= y  =>  b_i(x) <= b_i(y)`` on random ordered pairs (exact comparisons).

    ``worst_margin`` is the largest ``b_i(x) - b_i(y)``; positive means a violation.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-radius, radius, size=(trials, dim))
    # perturb a random subset of coordinates by a nonnegative amount
    mask = rng.random((trials, dim)) < 0.5
    mask[np.arange(trials), rng.integers(0, dim, trials)] = True
    y = x + mask * rng.exponential(1.0, size=(trials, dim))
    s = rng.random(trials)
    t = rng.random(trials)
    margin = np.max(drift.evaluate_nodes(s, t, x) - drift.evaluate_nodes(s, t, y), axis=1)
    return HypothesisReport(trials, int(np.count_nonzero(margin > 0.0)), float(margin.max()))


def check_growth(drift: DriftSpec, M: float, trials: int = 1000, seed: int = 0, dim: int = 1,
                 radius: float = 1e3) -> HypothesisReport:
    """Audit ``|b(s,t,x)| <= M (1 + |x|)`` on the ball of the given radius.

    Half the points are uniform in the ball, half have log-uniform norm so
    that small and moderate ``|x|`` are also visited.
    """
    if not M > 0:
        raise ValueError("M must be positive")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal((trials, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    half = trials // 2
    r = np.empty(trials)
    r[:half] = radius * rng.random(half) ** (1.0 / dim)
    r[half:] = np.exp(rng.uniform(math.log(1e-3), math.log(radius), trials - half))
    x = direction * r[:, None]
    b = drift.evaluate_nodes(rng.random(trials), rng.random(trials), x)
    norm_b = np.linalg.norm(b, axis=1)
    norm_x = np.linalg.norm(x, axis=1)
    excess = norm_b - M * (1.0 + norm_x)
    return HypothesisReport(trials, int(np.count_nonzero(excess > 0.0)), float(excess.max()),
                            float(np.max(norm_b / (1.0 + norm_x))))


def parse_drift(text: str) -> DriftSpec:
    """Parse ``zero``, ``identity``, ``sign``, ``tanh[:scale]``, ``const:c1,...``, ``linear:M``."""
    name, _, arg = text.strip().partition(":")
    name = name.lower()
    try:
        if name == "zero" and not arg:
            return zero()
        if name == "identity" and not arg:
            return identity()
        if name == "sign" and not arg:
            return componentwise_sign()
        if name == "tanh":
            return componentwise_tanh(float(arg) if arg else 1.0)
        if name in ("const", "constant") and arg:
            return constant([float(v) for v in arg.split(",")])
        if name == "linear" and arg:
            return linear(float(arg))
    except ValueError as exc:
        raise ValueError(f"bad drift parameters in {text!r}: {exc}") from None
    raise ValueError(f"unrecognised drift {text!r}")
