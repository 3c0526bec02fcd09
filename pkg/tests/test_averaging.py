import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sheetlab import averaging as av
from sheetlab import drift as dr
from sheetlab.field import GridSpec, SheetField, generate_sheet

seeds = st.integers(0, 2**63 - 1)
coords = st.floats(-3, 3, allow_nan=False)


def ulp_bound(n):
    return 4 * math.ulp(2.0 ** (-2 * n))


@given(seeds, st.integers(0, 3), st.data())
def test_rho_algebra_sign(seed, n, data):
    sheet = generate_sheet(GridSpec(32, 2), seed)
    k, kp = data.draw(st.integers(0, 2**n - 1)), data.draw(st.integers(0, 2**n - 1))
    blk = av.DyadicBlock(n, k, kp)
    x, y, z = (np.array(data.draw(st.tuples(coords, coords))) for _ in range(3))
    b = dr.componentwise_sign()
    rxy = av.rho(sheet, b, blk, x, y)
    assert np.array_equal(rxy, -av.rho(sheet, b, blk, y, x))
    assert np.all(av.rho(sheet, b, blk, x, x) == 0)
    assert np.array_equal(rxy, av.rho(sheet, b, blk, x, z) + av.rho(sheet, b, blk, z, y))
    assert np.all(np.abs(rxy) <= 2 * 1.0 * 4.0**-n)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    assert np.all(av.rho(sheet, b, blk, lo, hi) <= 0)


@given(seeds, st.integers(0, 3), st.data())
def test_rho_algebra_tanh(seed, n, data):
    sheet = generate_sheet(GridSpec(32), seed)
    blk = av.DyadicBlock(n, data.draw(st.integers(0, 2**n - 1)), data.draw(st.integers(0, 2**n - 1)))
    x, y, z = (data.draw(coords) for _ in range(3))
    b = dr.componentwise_tanh(1.0)
    rxy = av.rho(sheet, b, blk, x, y)
    assert np.array_equal(rxy, -av.rho(sheet, b, blk, y, x))
    chained = av.rho(sheet, b, blk, x, z) + av.rho(sheet, b, blk, z, y)
    assert np.all(np.abs(rxy - chained) <= ulp_bound(n))
    assert np.all(np.abs(rxy) <= 2 * 4.0**-n)
    assert np.all(av.rho(sheet, b, blk, min(x, y), max(x, y)) <= 0)


def test_rho_examples():
    sheet = generate_sheet(GridSpec(16), 4)
    blk = av.DyadicBlock(2, 1, 3)
    assert np.all(av.rho(sheet, dr.constant([3.0]), blk, 0.2, -0.7) == 0)
    # zero field, sign drift: rho(1, -1) = 2 * area
    flat = SheetField(GridSpec(16), np.zeros((17, 17, 1)))
    assert av.rho(flat, dr.componentwise_sign(), blk, 1.0, -1.0)[0] == 2 / 16
    with pytest.raises(ValueError):
        av.DyadicBlock(2, 4, 0)
    with pytest.raises(ValueError):
        av.block_integrals(generate_sheet(GridSpec(12), 1), dr.zero(), 3, 0.0)


def test_block_integrals_consistent_with_blocks():
    sheet = generate_sheet(GridSpec(32, 2), 9)
    b = dr.componentwise_tanh(1.0)
    F = av.block_integrals(sheet, b, 2, [0.1, -0.3])
    assert F.shape == (4, 4, 2)
    assert np.allclose(F[2, 1], av.block_integral(sheet, b, av.DyadicBlock(2, 2, 1), [0.1, -0.3]), atol=1e-16)
    # level 0 block is the whole square
    whole = av.window_integral(sheet, b, av.WindowSpec(0, 0, 1, 1), [0.1, -0.3])
    assert np.allclose(whole, av.block_integrals(sheet, b, 0, [0.1, -0.3])[0, 0], atol=1e-15)


def test_window_spec_checks():
    with pytest.raises(ValueError):
        av.WindowSpec(0.9, 0.0, 0.25, 0.25)
    w = av.WindowSpec(0.75, 0.5, 0.25, 0.5)
    assert w.node_range(GridSpec(8)) == (4, 6, 8, 8)


def test_fit_recovers_gaussian_tail():
    eta = np.linspace(0.1, 2.0, 20)
    p = 0.8 * np.exp(-0.5 * 3.0 * eta**2)
    alpha, c, r2, mask = av.fit_gaussian_tail(eta, p, 10**6)
    assert alpha == pytest.approx(1.5, rel=1e-9) and c == pytest.approx(0.8, rel=1e-9) and r2 == pytest.approx(1.0)
    assert av.fit_gaussian_tail(eta, np.zeros_like(eta), 100)[0] is None


def test_tail_estimate_small_run():
    rep = av.tail_estimate(dr.componentwise_tanh(1.0), av.WindowSpec(0.75, 0.75, 0.25, 0.25), 0.25, -0.25,
                           400, np.arange(1, 20) / 80, seed=11, grid_n=32)
    assert np.all(np.diff(rep.tail_prob) <= 0)
    assert np.all(rep.tail_prob <= 1) and rep.samples == 400
    # normalised ratio of a 1-Lipschitz drift never exceeds sqrt(eps eps')
    assert rep.tail_prob[-1] == 0 or rep.eta_grid[-1] <= 0.25
    with pytest.raises(ValueError):
        av.tail_estimate(dr.linear(1.0), av.WindowSpec(0, 0, 1, 1), 0.0, 1.0, 10, [0.1], 0)
    with pytest.raises(ValueError):
        av.tail_estimate(dr.componentwise_tanh(1.0), av.WindowSpec(0, 0, 1, 1), 0.5, 0.5, 10, [0.1], 0)


def test_tail_report_verdict_semantics():
    eta = np.array([0.1, 0.2])
    degenerate = av.TailReport(eta, np.zeros(2), np.zeros(2), None, None, None, 10)
    assert degenerate.verdict is None
    bad = av.TailReport(eta, np.array([0.5, 0.4]), np.zeros(2), -1.0, 1.0, 0.9, 10)
    assert bad.verdict is False


def test_dyadic_points():
    pts = av.dyadic_points(2, 2)
    assert pts.shape == (81, 2) and np.all(np.abs(pts) <= 1)
    with pytest.raises(ValueError):
        av.dyadic_points(5, 1)


def test_modulus_scan():
    sheet = generate_sheet(GridSpec(32), 2)
    assert av.modulus_scan(sheet, dr.zero(), 2, 2).value == 0.0
    res = av.modulus_scan(sheet, dr.componentwise_tanh(1.0), 2, 2)
    assert 0 < res.value < math.inf and res.block is not None
    # brute-force check of the reported maximum
    pts = av.dyadic_points(2, 1)
    b = dr.componentwise_tanh(1.0)
    F = [av.block_integrals(sheet, b, 2, p) for p in pts]
    best = 0.0
    for i in range(len(pts)):
        for j in range(len(pts)):
            d = abs(pts[i][0] - pts[j][0])
            if d == 0:
                continue
            r = np.abs(F[i] - F[j])[..., 0]
            best = max(best, r.max() / (0.25 * (math.sqrt(2) + math.sqrt(max(0.0, math.log(1 / d)))) * d))
    assert res.value == pytest.approx(best, rel=1e-12)


def test_zero_anchor_scan():
    sheet = generate_sheet(GridSpec(32), 2)
    pts = [p for p in av.dyadic_points(3, 1) if p[0] != 0]
    r = av.zero_anchor_scan(sheet, dr.componentwise_sign(), 3, pts)
    assert r.value > 0 and r.log2_value == pytest.approx(math.log2(r.value))
    ext = av.zero_anchor_scan(sheet, dr.componentwise_sign(), 3, pts, extended_log=True)
    assert ext.value == r.value
    with pytest.raises(OverflowError):
        av.zero_anchor_scan(sheet, dr.componentwise_sign(), 5, pts)
    assert math.isfinite(av.zero_anchor_scan(sheet, dr.componentwise_sign(), 5, pts, extended_log=True).log2_value)


def test_exp_moment_examples():
    w = av.WindowSpec(0, 0, 0.5, 0.5)
    r = av.exp_moment(dr.componentwise_tanh(1.0), w, 0.0, 50, 1, grid_n=16)
    assert r.estimate == 1.0 and r.std_err == 0.0
    lin = av.exp_moment(dr.linear(1.0), w, 0.1, 20, 1, grid_n=16)
    assert lin.estimate == pytest.approx(math.exp(0.1 * 0.25))
    with pytest.raises(ValueError):
        av.exp_moment(dr.zero(), w, -1.0, 5, 0)


def test_exp_moment_bounded_by_lipschitz():
    # |grad tanh| <= 1, so every sample lies in [1, e^{alpha eps eps'}]
    w = av.WindowSpec(0, 0, 0.25, 0.25)
    r = av.exp_moment(dr.componentwise_tanh(1.0), w, 0.5, 100, 3, grid_n=32)
    assert 1.0 <= r.estimate <= math.exp(0.5 / 16)
