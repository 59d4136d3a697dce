"""Vectorized double-double ("dd") arithmetic, ~106-bit significand.

A dd number is an unevaluated sum hi + lo with |lo| <= ulp(hi)/2. All
routines operate componentwise on numpy arrays of matching shape and
return (hi, lo) pairs. Only the operations needed by the extended
precision path of the stability module are provided: +,-,*,/, sqrt, and
the dense linear algebra built from them (normal matrix, Cholesky,
triangular solves, inverse iteration).

Algorithms are the classical error-free transforms (Knuth two_sum,
Dekker split/two_prod) as used in the QD library of Hida, Li & Bailey.
No FMA is assumed.
"""

from __future__ import annotations

import numpy as np

# 2**27 + 1, splits a 53-bit significand into two 26-bit halves
_SPLITTER = 134217729.0


def two_sum(a, b):
    """s + err == a + b exactly, s = fl(a + b)."""
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def quick_two_sum(a, b):
    """Like two_sum but requires |a| >= |b| (or a == 0)."""
    s = a + b
    err = b - (s - a)
    return s, err


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    """p + err == a * b exactly, p = fl(a * b)."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def dd(hi, lo=None):
    """Promote float/array input to a normalized (hi, lo) pair."""
    hi = np.asarray(hi, dtype=float)
    if lo is None:
        return hi, np.zeros_like(hi)
    return quick_two_sum(hi, np.asarray(lo, dtype=float))


def dd_add(a, b):
    s, e = two_sum(a[0], b[0])
    e = e + a[1] + b[1]
    return quick_two_sum(s, e)


def dd_neg(a):
    return -a[0], -a[1]


def dd_sub(a, b):
    return dd_add(a, dd_neg(b))


def dd_mul(a, b):
    p, e = two_prod(a[0], b[0])
    e = e + a[0] * b[1] + a[1] * b[0]
    return quick_two_sum(p, e)


def dd_mul_d(a, b):
    """dd * plain double array."""
    p, e = two_prod(a[0], b)
    e = e + a[1] * b
    return quick_two_sum(p, e)


def dd_div(a, b):
    """Long division with two correction steps; error ~ few ulps of dd."""
    q1 = a[0] / b[0]
    r = dd_sub(a, dd_mul_d(b, q1))
    q2 = r[0] / b[0]
    r = dd_sub(r, dd_mul_d(b, q2))
    q3 = r[0] / b[0]
    s, e = quick_two_sum(q1, q2)
    return dd_add((s, e), dd(q3))


def dd_sqr(a):
    p, e = two_prod(a[0], a[0])
    e = e + 2.0 * a[0] * a[1]
    return quick_two_sum(p, e)


def dd_sqrt(a):
    """Componentwise sqrt; requires a >= 0 (0 maps to 0)."""
    hi = np.asarray(a[0], dtype=float)
    pos = hi > 0.0
    safe = np.where(pos, hi, 1.0)
    r = 1.0 / np.sqrt(safe)
    x = safe * r  # first approximation of sqrt
    # one Newton correction computed in dd: x + (a - x^2) * r / 2
    diff = dd_sub(a, dd_sqr((x, np.zeros_like(x))))
    corr = diff[0] * (r * 0.5)
    s, e = two_sum(x, corr)
    s, e = quick_two_sum(s, e)
    return np.where(pos, s, 0.0), np.where(pos, e, 0.0)


def dd_dot(a, b):
    """Dot product of two dd vectors, accumulated in dd."""
    prod = dd_mul(a, b)
    shi, slo = dd(0.0)
    for i in range(prod[0].shape[0]):
        shi, slo = dd_add((shi, slo), (prod[0][i], prod[1][i]))
    return shi, slo


def normal_matrix(A, chunk=16):
    """A^T A accumulated in dd for a float64 matrix A of shape (m, n).

    Row-chunked so the exact products are formed on (c, n, n) blocks and
    folded into the accumulator with dd additions; the result is exact up
    to the ~106-bit working precision rather than sqrt(m)*eps.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    ghi = np.zeros((n, n))
    glo = np.zeros((n, n))
    for start in range(0, m, chunk):
        blk = A[start:start + chunk]
        p, e = two_prod(blk[:, :, None], blk[:, None, :])
        for r in range(p.shape[0]):
            ghi, glo = dd_add((ghi, glo), (p[r], e[r]))
    return ghi, glo


class CholeskyFailure(ArithmeticError):
    """Leading minor not positive definite at the working precision."""


def dd_cholesky(G):
    """Lower Cholesky factor of a symmetric positive definite dd matrix.

    Right-looking, column oriented: each step scales one column and
    downdates the trailing block with a dd outer product, so the inner
    loops are whole-array numpy operations.
    """
    ghi, glo = G
    n = ghi.shape[0]
    lhi = np.tril(ghi).copy()
    llo = np.tril(glo).copy()
    for j in range(n):
        d = (lhi[j, j], llo[j, j])
        if not d[0] > 0.0:
            raise CholeskyFailure(f"pivot {j} nonpositive ({d[0]!r})")
        piv = dd_sqrt(d)
        lhi[j, j], llo[j, j] = piv[0], piv[1]
        if j + 1 == n:
            break
        col = dd_div((lhi[j + 1:, j], llo[j + 1:, j]), piv)
        lhi[j + 1:, j], llo[j + 1:, j] = col
        outer = dd_mul((col[0][:, None], col[1][:, None]),
                       (col[0][None, :], col[1][None, :]))
        trail = dd_sub((lhi[j + 1:, j + 1:], llo[j + 1:, j + 1:]), outer)
        lhi[j + 1:, j + 1:], llo[j + 1:, j + 1:] = trail
    return np.tril(lhi), np.tril(llo)


def dd_solve_cholesky(L, b):
    """Solve (L L^T) x = b in dd given the dd Cholesky factor."""
    lhi, llo = L
    n = lhi.shape[0]
    yhi = np.asarray(b[0], dtype=float).copy()
    ylo = np.asarray(b[1], dtype=float).copy()
    # forward: L y = b, column oriented
    for j in range(n):
        yj = dd_div((yhi[j], ylo[j]), (lhi[j, j], llo[j, j]))
        yhi[j], ylo[j] = yj
        if j + 1 < n:
            upd = dd_mul((lhi[j + 1:, j], llo[j + 1:, j]), yj)
            yhi[j + 1:], ylo[j + 1:] = dd_sub((yhi[j + 1:], ylo[j + 1:]), upd)
    # backward: L^T x = y
    for j in range(n - 1, -1, -1):
        xj = dd_div((yhi[j], ylo[j]), (lhi[j, j], llo[j, j]))
        yhi[j], ylo[j] = xj
        if j > 0:
            upd = dd_mul((lhi[j, :j], llo[j, :j]), xj)
            yhi[:j], ylo[:j] = dd_sub((yhi[:j], ylo[:j]), upd)
    return yhi, ylo


def smallest_eigenvalue(G, rtol=1e-6, max_iter=200, seed=0):
    """Smallest eigenvalue of a symmetric positive definite dd matrix.

    Inverse iteration through the dd Cholesky factor; the Rayleigh
    quotient of the iterate is returned once its relative change drops
    below rtol. Raises CholeskyFailure if G is not numerically positive
    definite at dd precision.
    """
    L = dd_cholesky(G)
    n = G[0].shape[0]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam_prev = np.inf
    for _ in range(max_iter):
        z = dd_solve_cholesky(L, dd(x))
        # G z = x  =>  Rayleigh quotient of z is (z.x)/(z.z)
        num = dd_dot(z, dd(x))
        den = dd_dot(z, z)
        lam = dd_div(num, den)[0]
        nz = np.linalg.norm(z[0])
        x = z[0] / nz
        if abs(lam - lam_prev) <= rtol * abs(lam):
            return float(lam)
        lam_prev = lam
    return float(lam_prev)
