import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.special
from hypothesis import given, strategies as st

from sheetlab import gronwall as gw

# 30-term series at z=2, summed exactly in rationals (independent of the float loop)
I0_AT_2 = float(sum(Fraction(1, math.factorial(k) ** 2) for k in range(30)))


def oracle_i0(z: float) -> float:
    """Thirty terms of the series, added from the smallest term up."""
    q = z * z / 4
    return math.fsum(q**k / math.factorial(k) ** 2 for k in reversed(range(30)))


def test_bessel_examples():
    assert gw.bessel_i0(0.0) == 1.0
    assert abs(gw.bessel_i0(2.0) - I0_AT_2) <= 1e-12 * I0_AT_2
    assert abs(I0_AT_2 - 2.2795853023360673) < 1e-15
    small = gw.bessel_i0(1e-4) - 1
    assert abs(small - 2.5e-9) < 1e-15


@given(st.floats(0, 10))
def test_bessel_matches_oracles(z):
    v = gw.bessel_i0(z)
    assert abs(v - oracle_i0(z)) <= 1e-12 * v
    assert abs(v - scipy.special.i0(z)) <= 1e-13 * v


@given(st.floats(0, 50), st.floats(1e-6, 5))
def test_bessel_monotone(z, dz):
    assert gw.bessel_i0(z + dz) >= gw.bessel_i0(z)


def test_bessel_errors():
    with pytest.raises(ValueError):
        gw.bessel_i0(-1.0)
    with pytest.raises(OverflowError):
        gw.bessel_i0(701.0)


def test_resolvent_examples():
    assert gw.resolvent_h(1.0, 0.5, 0.2, 0.5, 0.9) == 1.0
    assert gw.resolvent_h(0.0, 0.1, 0.1, 0.9, 0.9) == 1.0
    assert gw.resolvent_h(1.0, 0, 0, 1, 1) == gw.bessel_i0(2.0)
    with pytest.raises(ValueError):
        gw.resolvent_h(1.0, 0.6, 0, 0.5, 1)


def test_verify_resolvent():
    assert gw.verify_resolvent(0.0, 16) == 0.0
    r128, r256 = gw.verify_resolvent(1.0, 128), gw.verify_resolvent(1.0, 256)
    assert r128 <= 1e-3
    assert abs(r256 / r128 - 0.25) <= 0.3 * 0.25
    with pytest.raises(ValueError):
        gw.verify_resolvent(1.0, 4)


def test_continuous_bound():
    assert np.all(gw.continuous_bound(np.zeros((9, 9)), 1.0) == 0)
    g64 = gw.continuous_bound(np.ones((65, 65)), 1.0)[-1, -1]
    g128 = gw.continuous_bound(np.ones((129, 129)), 1.0)[-1, -1]
    # constant forcing collapses to the resolvent value, O(1/N) quadrature error
    assert abs(g64 - I0_AT_2) < 2 / 64 * I0_AT_2
    assert abs(g128 - I0_AT_2) < abs(g64 - I0_AT_2)
    with pytest.raises(ValueError):
        gw.continuous_bound(-np.ones((5, 5)), 1.0)


def test_marched_solution_below_majorant():
    F = np.ones((65, 65))
    u = gw.march_linear_volterra(F, 1.0)
    G = gw.continuous_bound(F, 1.0)
    assert np.all(u <= G + 1e-12)


@given(st.integers(1, 5), st.integers(1, 8), st.floats(0, 10), st.floats(-100, 0))
def test_table_identity(n, d, c1, beta_log2):
    t = gw.discrete_bound_table(n, d, c1, beta_log2)
    a = math.log2(3 * math.sqrt(d))
    g = math.log2(1 + c1 * math.sqrt(d * n) * 2.0**-n)
    size = 2**n
    assert t.entries_log2.shape == (size, size)
    for k, kp in [(1, 1), (size, 1), (size, size)]:
        expect = (k + kp - 1) * a + (k + kp) * g + beta_log2
        assert abs(t.entry(k, kp) - expect) <= 1e-9 * max(1, abs(expect))
    diag = np.diag(t.entries_log2)
    assert np.allclose(np.diff(diag), 2 * (a + g))
    assert np.all(np.diff(t.entries_log2, axis=0) >= 0) and np.all(np.diff(t.entries_log2, axis=1) >= 0)


def test_table_examples():
    t = gw.discrete_bound_table(3, 1, 0.0, 0.0)
    assert t.entry(1, 1) == math.log2(3)
    assert t.entry(2, 3) == pytest.approx(4 * math.log2(3))
    t2 = gw.discrete_bound_table(2, 4, 0.0, -7.0)
    assert t2.entry(1, 1) == pytest.approx(math.log2(6) - 7)


def test_table_csv(tmp_path):
    t = gw.discrete_bound_table(2, 1, 1.0, 0.0)
    t.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "k,k',log2_bound" and len(lines) == 17


def test_beta_interval_exact():
    # n=3: 2^(4.5) = 22.6 -> 23, 2^4 = 16
    assert gw.beta_interval_log2(3) == (-23, -16)
    assert gw.beta_interval_log2(12) == (-262144, -65536)
    for n in range(1, 40):
        lo, hi = gw.beta_interval_log2(n)
        assert (-lo - 1) ** 2 < 2 ** (3 * n) <= lo * lo
        assert (-hi) ** 3 <= 2 ** (4 * n) < (-hi + 1) ** 3


def test_vanishing_examples():
    assert gw.vanishing_exponent(12, 1) == 16384 - 65536
    assert gw.vanishing_exponent(3, 1) > 0
    for d in range(1, 17):
        L = [gw.vanishing_exponent(n, d) for n in range(12, 30)]
        assert all(b < a for a, b in zip(L, L[1:]))
    rep = gw.vanishing_check(24, 1, 1.0)
    assert rep.verdict and rep.n0 is not None and rep.n0 <= 12
    assert rep.precondition[0] is False and rep.precondition[-1] is True


def test_vanishing_not_yet_contracting():
    assert not gw.vanishing_check(5, 1, 1.0).verdict


@given(st.integers(0, 2**3000))
def test_integer_cube_root(m):
    r = gw._icbrt_floor(m)
    assert r**3 <= m < (r + 1) ** 3


def test_vanishing_for_large_levels():
    assert all(gw.vanishing_exponent(n, 1) < 0 for n in range(12, 300))
