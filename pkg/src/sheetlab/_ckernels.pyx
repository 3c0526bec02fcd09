# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled loops for the Volterra march and the dyadic pair scan.

Both kernels reproduce the summation order of the numpy fallback so the
two backends agree bit for bit whenever the drift is evaluated identically.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, sqrt, log, fabs, isfinite, INFINITY

cnp.import_array()

cdef enum:
    ZERO = 0
    CONST = 1
    LINEAR = 2
    SIGN = 3
    TANH = 4


cdef inline double _drift(int code, double x, double param, double cval) noexcept nogil:
    if code == ZERO:
        return 0.0
    if code == CONST:
        return cval
    if code == LINEAR:
        return param * x
    if code == SIGN:
        if x > 0.0:
            return 1.0
        if x < 0.0:
            return -1.0
        return 0.0
    return tanh(param * x)


def march(double[:, :, ::1] base, double h2, int code, double param,
          double[::1] cvec, double level):
    """Solve ``X = base + h2 * Q(b(X))`` node by node.

    ``Q(g)[i, j] = sum_{p<i} sum_{q<j} g[p, q]`` accumulated first along
    ``q`` then along ``p``.  ``level`` clamps the drift (``inf`` disables).
    Returns ``(X, ok)`` where ``ok`` is False if a drift value was not finite.
    """
    cdef Py_ssize_t n1 = base.shape[0], m1 = base.shape[1], d = base.shape[2]
    cdef Py_ssize_t i, j, k
    out = np.empty((n1, m1, d))
    cdef double[:, :, ::1] X = out
    cdef double[:, ::1] S = np.zeros((m1, d))
    cdef double[::1] R = np.zeros(d)
    cdef double b
    cdef bint ok = True
    with nogil:
        for i in range(n1):
            for j in range(m1):
                for k in range(d):
                    X[i, j, k] = base[i, j, k] + h2 * S[j, k]
            if i == n1 - 1:
                break
            # S[i+1, j] = S[i, j] + R[i, j],  R[i, j] = sum_{q<j} b[i, q]
            for k in range(d):
                R[k] = 0.0
            for j in range(m1):
                for k in range(d):
                    S[j, k] = S[j, k] + R[k]
                    b = _drift(code, X[i, j, k], param, cvec[k])
                    if b > level:
                        b = level
                    elif b < -level:
                        b = -level
                    if not isfinite(b):
                        ok = False
                    R[k] = R[k] + b
    return out, ok


def pair_scan(double[:, :, ::1] F, double[:, ::1] pts, int n):
    """Largest ``|F[x] - F[y]| / (2^-n (sqrt(n) + sqrt(log+ 1/r)) r)``.

    ``F`` has shape ``(P, B, d)``: block integrals for each point and block.
    Returns ``(ratio, ix, iy, block)`` over pairs ``ix < iy``.
    """
    cdef Py_ssize_t P = F.shape[0], B = F.shape[1], d = F.shape[2]
    cdef Py_ssize_t a, c, blk, k
    cdef double r2, r, diff, num2, denom, ratio
    cdef double best = 0.0
    cdef Py_ssize_t bx = -1, by = -1, bb = -1
    cdef double scale = 2.0 ** (-n)
    cdef double sn = sqrt(<double> n)
    with nogil:
        for a in range(P):
            for c in range(a + 1, P):
                r2 = 0.0
                for k in range(d):
                    diff = pts[a, k] - pts[c, k]
                    r2 = r2 + diff * diff
                r = sqrt(r2)
                if r == 0.0:
                    continue
                denom = sn
                if r < 1.0:
                    denom = denom + sqrt(-log(r))
                denom = scale * denom * r
                for blk in range(B):
                    num2 = 0.0
                    for k in range(d):
                        diff = F[a, blk, k] - F[c, blk, k]
                        num2 = num2 + diff * diff
                    ratio = sqrt(num2) / denom
                    if ratio > best:
                        best = ratio
                        bx = a
                        by = c
                        bb = blk
    return best, bx, by, bb
