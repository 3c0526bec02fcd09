"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints one PASS/FAIL line (also collected in the terminal
summary) before asserting.
"""
import argparse
import math
from fractions import Fraction

import numpy as np
import pytest

from sheetlab import averaging as av
from sheetlab import drift as dr
from sheetlab import gronwall as gw
from sheetlab import localtime as lt
from sheetlab.cli import uniqueness_experiment as uniqueness_cli
from sheetlab.field import GridSpec, coarsen, generate_sheet, sup_norm
from sheetlab.girsanov import martingale_check, weak_solution_shift
from sheetlab.montecarlo import derive_seeds, ordered_map
from sheetlab.solver import BoundaryTrace, TruncationError, apriori_bound, solve_explicit, solve_truncated

BASE = 2026
pytestmark = pytest.mark.slow


def test_01_sheet_law(acceptance):
    grid = GridSpec(64, 1)
    pairs = np.array(ordered_map(lambda sd: (lambda v: (v[64, 64, 0], v[32, 64, 0], v[64, 32, 0]))(
        generate_sheet(grid, int(sd)).values), derive_seeds(BASE, 10_000)))
    var = float(np.mean(pairs[:, 0] ** 2))
    prod = pairs[:, 1] * pairs[:, 2]
    cov, se = float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(len(prod)))
    ok = abs(var - 1) <= 3 * math.sqrt(2) / 100 and abs(cov - 0.25) <= 4 * se
    acceptance("1 sheet law", ok, f"Var(W11)={var:.4f} Cov={cov:.4f} (se {se:.4f})")
    assert ok


def test_02_bessel_resolvent(acceptance):
    series = float(sum(Fraction(1, math.factorial(k) ** 2) for k in range(30)))
    err = abs(gw.bessel_i0(2.0) - series)
    r128, r256 = gw.verify_resolvent(1.0, 128), gw.verify_resolvent(1.0, 256)
    ratio = r128 / r256
    ok = err <= 1e-12 and r128 <= 1e-3 and 3.5 <= ratio <= 4.5
    acceptance("2 bessel/resolvent", ok, f"|I0(2)-series|={err:.1e} res128={r128:.2e} shrink={ratio:.3f}")
    assert ok


def test_03_solver_exactness_and_inverse(acceptance):
    exact, worst = True, 0.0
    for sd in derive_seeds(BASE, 10, stream=7):
        for dim in (1, 2):
            sheet = generate_sheet(GridSpec(128, dim), int(sd))
            b = BoundaryTrace.constant(sheet.grid, 0.3)
            exact &= bool(np.array_equal(solve_explicit(dr.zero(), sheet, b).values, sheet.values + b.closure()))
            for drift in (dr.componentwise_tanh(1.0), dr.componentwise_sign()):
                X = solve_explicit(drift, sheet, b).values
                back = weak_solution_shift(solve_explicit(drift, sheet, b).field, drift).values
                scale = max(np.abs(X).max(), np.abs(sheet.values).max())
                worst = max(worst, float(np.abs(back - sheet.values).max() / np.spacing(scale)))
    ok = exact and worst <= 2
    acceptance("3 solver exact/inverse", ok, f"zero-drift exact={exact} round-trip max {worst:.2f} ulp")
    assert ok


def test_04_apriori_bound(acceptance):
    drift = dr.linear(1.0)
    worst, active = -math.inf, 0
    for sd in derive_seeds(BASE, 100, stream=8):
        sheet = generate_sheet(GridSpec(128), int(sd))
        try:
            sol = solve_truncated(drift, sheet)
        except TruncationError:
            active += 1
            continue
        worst = max(worst, sup_norm(sol.field) - apriori_bound(1.0, sup_norm(sheet)))
    ok = active == 0 and worst <= 0.05
    acceptance("4 a-priori bound", ok, f"max(sup|X| - bound)={worst:.3f} truncation active on {active} seeds")
    assert ok


def test_05_rho_algebra(acceptance):
    rng = np.random.default_rng(BASE)
    sign, tanh = dr.componentwise_sign(), dr.componentwise_tanh(1.0)
    sheets = [generate_sheet(GridSpec(32, 2), int(sd)) for sd in derive_seeds(BASE, 50, stream=9)]
    sign_ok, tanh_ok, chain_err = True, True, 0.0
    for case in range(1000):
        sheet = sheets[case % 50]
        n = int(rng.integers(0, 4))
        blk = av.DyadicBlock(n, int(rng.integers(0, 2**n)), int(rng.integers(0, 2**n)))
        x, y, z = rng.uniform(-3, 3, size=(3, 2))
        lo, hi = np.minimum(x, y), np.maximum(x, y)
        ceiling = 2 * 4.0**-n
        for drift in (sign, tanh):
            rxy = av.rho(sheet, drift, blk, x, y)
            chain = av.rho(sheet, drift, blk, x, z) + av.rho(sheet, drift, blk, z, y)
            exact_part = (np.array_equal(rxy, -av.rho(sheet, drift, blk, y, x))
                          and np.all(np.abs(rxy) <= ceiling)
                          and np.all(av.rho(sheet, drift, blk, lo, hi) <= 0))
            if drift is sign:
                sign_ok &= bool(exact_part and np.array_equal(rxy, chain))
            else:
                chain_err = max(chain_err, float(np.abs(rxy - chain).max() / math.ulp(4.0**-n)))
                tanh_ok &= bool(exact_part)
    ok = sign_ok and tanh_ok and chain_err <= 4
    acceptance("5 rho algebra", ok,
               f"1000 cases: sign exact={sign_ok}; tanh exact parts={tanh_ok}, chaining within {chain_err:.1f} ulp")
    assert ok


def test_06_tail(acceptance):
    rep = av.tail_estimate(dr.componentwise_tanh(1.0), av.WindowSpec(0.75, 0.75, 0.25, 0.25), 0.25, -0.25,
                           20_000, np.arange(1, 20) / 80, seed=BASE, grid_n=64)
    ok = rep.alpha_hat is not None and rep.alpha_hat > 0 and rep.r2 >= 0.9 and rep.verdict is True
    acceptance("6 rho tail", ok, f"alpha={rep.alpha_hat:.2f} c={rep.c_hat:.3f} r2={rep.r2:.3f} "
               f"retained={int(rep.retained.sum())}/{rep.eta_grid.size}")
    assert ok


def test_07_exp_moment(acceptance):
    res = av.exp_moment_sweep(dr.componentwise_tanh(1.0), [1, 0.5, 0.25, 0.125], 0.01, 2000, BASE, grid_n=128)
    est = [r.estimate for r in res]
    ratio = max(est) / min(est)
    ok = ratio <= 3 and not any(r.unstable for r in res)
    acceptance("7 exp moment", ok, f"estimates={[round(e, 5) for e in est]} max/min={ratio:.4f}")
    assert ok


def test_08_local_time(acceptance):
    N = 1024
    x = np.linspace(-4, 4, 801)
    mass_err = 0.0
    for sd in derive_seeds(BASE, 5, stream=10):
        sheet = generate_sheet(GridSpec(N), int(sd))
        for s, t in ((1.0, 1.0), (0.5, 0.75)):
            mass_err = max(mass_err, abs(lt.row_local_time(sheet, sheet.grid.index_of(s), t, x).total_mass() - t) / t,
                           abs(lt.plane_local_time(sheet, s, t, x).total_mass() - s * t) / (s * t))

    def tanaka(sd):
        sheet = generate_sheet(GridSpec(N), int(sd))
        return [lt.tanaka_residual(w, w.n, 1.0, 0.0) for w in (coarsen(sheet, 2), sheet)]

    rms = np.sqrt(np.mean(np.square(ordered_map(tanaka, derive_seeds(BASE, 100, stream=4))), axis=0))

    f, df = lt.coordinate_bump()

    def lts(sd):
        terms = lt.lts_formula_terms(generate_sheet(GridSpec(N), int(sd)), f, df)
        return terms.residual, terms.lhs

    r = np.array(ordered_map(lts, derive_seeds(BASE, 200, stream=5)))
    lts_ratio = math.sqrt(np.mean(r[:, 0] ** 2)) / math.sqrt(np.mean(r[:, 1] ** 2))
    ok = mass_err <= 0.02 and rms[1] < rms[0] and lts_ratio <= 0.05
    acceptance("8 local time", ok, f"mass err={mass_err:.4f} tanaka rms 512->1024 {rms[0]:.4f}->{rms[1]:.4f} "
               f"lts ratio={lts_ratio:.4f}")
    assert ok


def test_09_girsanov(acceptance):
    lines, ok = [], True
    for dim in (1, 2):
        for drift in (dr.constant([0.5] * dim), dr.componentwise_tanh(1.0)):
            rep = martingale_check(drift, 20_000, [0.25, 0.5, 1.0], BASE, grid_n=64, dim=dim)
            z = max(abs(m - 1) / s for m, s in zip(rep.mean, rep.std_err))
            ok &= rep.verdict
            lines.append(f"{drift.kind}/d={dim}: max|EZ-1|/se={z:.2f}")
    acceptance("9 girsanov", ok, "; ".join(lines))
    assert ok


def test_10_uniqueness(acceptance):
    args = argparse.Namespace(seed=BASE, drift="sign", grid_n=256, dim=1, n=4, seeds=20, beta=1e-6,
                              base_level=0.5, workers=None)
    res = uniqueness_cli(args)
    n_values = range(12, 200)
    vanish = all(gw.vanishing_exponent(n, 1) < 0 for n in n_values) and gw.vanishing_check(24, 1, 1.0).verdict
    ok = res["max_fixed_point_gap"] <= 1e-6 and res["min_margin_log2"] >= 0 and vanish
    acceptance("10 uniqueness", ok, f"max gap={res['max_fixed_point_gap']:.1e} "
               f"min profile margin={res['min_margin_log2']:.3f} (log2) L(n)<0 for n>=12: {vanish}")
    assert ok
