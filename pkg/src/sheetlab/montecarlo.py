"""Seed derivation and order-preserving parallel maps for Monte Carlo loops."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def derive_seeds(base_seed: int, count: int, stream: int = 0) -> np.ndarray:
    """``count`` independent 64-bit seeds from ``(base_seed, stream)``.

    Distinct streams give unrelated seed sequences for experiments sharing a
    base seed.
    """
    ss = np.random.SeedSequence([int(base_seed), int(stream)])
    return ss.generate_state(int(count), np.uint64)


def default_workers() -> int:
    env = os.environ.get("SHEETLAB_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def ordered_map(func: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """``[func(x) for x in items]`` evaluated on a thread pool.

    Results come back in input order whatever the completion order, so any
    reduction over them is independent of the worker count.
    """
    items = list(items)
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def mean_and_se(values: Sequence[float] | np.ndarray) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), float("nan")
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))
