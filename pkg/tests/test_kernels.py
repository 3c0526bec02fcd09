import numpy as np
import pytest

from sheetlab import drift as dr
from sheetlab import kernels
from sheetlab.averaging import block_integrals, dyadic_points
from sheetlab.field import GridSpec, generate_sheet
from sheetlab.solver import BoundaryTrace, solve_explicit

compiled = pytest.mark.skipif("compiled" not in kernels.available_backends(), reason="extension not built")


def test_python_backend_always_available():
    assert "python" in kernels.available_backends()
    assert kernels.BACKEND in kernels.available_backends()


@compiled
@pytest.mark.parametrize("drift", [dr.zero(), dr.constant([0.3, -1.0]), dr.linear(0.7), dr.identity(),
                                   dr.componentwise_sign()], ids=lambda d: d.name)
def test_march_parity_exact(drift):
    sheet = generate_sheet(GridSpec(64, 2), 5)
    b = BoundaryTrace.constant(sheet.grid, [0.2, -0.1])
    a = solve_explicit(drift, sheet, b, backend="compiled").values
    p = solve_explicit(drift, sheet, b, backend="python").values
    assert np.array_equal(a, p)


@compiled
def test_march_parity_tanh():
    sheet = generate_sheet(GridSpec(64, 2), 5)
    d = dr.componentwise_tanh(1.5)
    a = solve_explicit(d, sheet, backend="compiled").values
    p = solve_explicit(d, sheet, backend="python").values
    assert np.abs(a - p).max() <= 1e-13


@compiled
def test_march_parity_truncated_level():
    sheet = generate_sheet(GridSpec(32), 5)
    d = dr.truncate(dr.linear(3.0), 1.5)
    b = BoundaryTrace.constant(sheet.grid, 1.0)
    assert np.array_equal(solve_explicit(d, sheet, b, backend="compiled").values,
                          solve_explicit(d, sheet, b, backend="python").values)


@compiled
def test_custom_drift_falls_back():
    sheet = generate_sheet(GridSpec(16), 1)
    d = dr.custom(lambda s, t, x: np.sin(x))
    assert np.array_equal(solve_explicit(d, sheet, backend="compiled").values,
                          solve_explicit(d, sheet, backend="python").values)


@compiled
@pytest.mark.parametrize("dim", [1, 2])
def test_pair_scan_parity(dim):
    sheet = generate_sheet(GridSpec(32, dim), 8)
    pts = dyadic_points(2, dim)
    F = np.stack([block_integrals(sheet, dr.componentwise_tanh(1.0), 2, p).reshape(-1, dim) for p in pts])
    a = kernels.pair_scan(F, pts, 2, backend="compiled")
    p = kernels.pair_scan(F, pts, 2, backend="python")
    assert a[1:] == p[1:]
    assert a[0] == pytest.approx(p[0], rel=1e-14)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.pair_scan(np.zeros((2, 1, 1)), np.zeros((2, 1)), 0, backend="gpu")


def test_env_forces_fallback():
    import os
    import subprocess
    import sys
    env = dict(os.environ, SHEETLAB_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import sheetlab; print(sheetlab.BACKEND)"], env=env,
                         capture_output=True, text=True, check=True).stdout.strip()
    assert out == "python"
