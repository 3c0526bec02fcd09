"""Compare the compiled and numpy backends on the two hot kernels.

    python3 benchmarks/bench_kernels.py [--sizes 128,256,512] [--repeat 5]

Prints the best-of-``repeat`` wall time per backend and the speed-up.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from sheetlab import drift as dr
from sheetlab import kernels
from sheetlab.averaging import block_integrals, dyadic_points
from sheetlab.field import GridSpec, generate_sheet
from sheetlab.solver import solve_explicit


def best_time(func, repeat: int) -> float:
    return min(timeit.repeat(func, number=1, repeat=repeat))


def bench_march(sizes, repeat, backends):
    rows = []
    for drift in (dr.componentwise_sign(), dr.componentwise_tanh(1.0), dr.linear(1.0)):
        for N in sizes:
            sheet = generate_sheet(GridSpec(N, 1), 1)
            times = {b: best_time(lambda b=b: solve_explicit(drift, sheet, backend=b), repeat) for b in backends}
            rows.append((f"march {drift.name}", N, times))
    return rows


def bench_pair_scan(levels, repeat, backends, m_max=3, dim=1, N=128):
    rows = []
    sheet = generate_sheet(GridSpec(N, dim), 2)
    pts = dyadic_points(m_max, dim)
    for n in levels:
        F = np.stack([block_integrals(sheet, dr.componentwise_tanh(1.0), n, p).reshape(-1, dim) for p in pts])
        times = {b: best_time(lambda b=b: kernels.pair_scan(F, pts, n, backend=b), repeat) for b in backends}
        rows.append((f"pair_scan m={m_max}", n, times))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="128,256,512")
    parser.add_argument("--levels", default="2,4,6")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = kernels.available_backends()
    sizes = [int(v) for v in args.sizes.split(",")]
    levels = [int(v) for v in args.levels.split(",")]
    rows = bench_march(sizes, args.repeat, backends) + bench_pair_scan(levels, args.repeat, backends)
    print(f"{'kernel':<22}{'size':>6}" + "".join(f"{b:>12}" for b in backends) + "   speed-up")
    for name, size, times in rows:
        line = f"{name:<22}{size:>6}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        if "compiled" in times:
            line += f"   {times['python'] / times['compiled']:.1f}x"
        print(line)
    if "compiled" not in backends:
        print("compiled extension not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
