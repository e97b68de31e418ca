# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: Sturm counting and Magnus transfer-matrix stepping.

Signatures mirror :mod:`gapmodes._pykernels` exactly; :mod:`gapmodes.kernels`
picks one of the two at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cosh, sinh, cos, sin, fabs

cnp.import_array()

cdef double SQRT3_12 = 0.14433756729740643  # sqrt(3) / 12


cdef inline void _series(double z, double *c, double *sn, double *dsn) noexcept nogil:
    # cosh(sqrt z), sinh(sqrt z)/sqrt z and d/dz of the latter, for small |z|
    cdef double p = 1.0, f_even = 1.0, f_odd = 1.0
    cdef double cs = 1.0, s = 1.0, ds = 0.0
    cdef int k
    for k in range(1, 12):
        # p = z**(k-1), f_odd = (2k-1)!
        ds += k * p / (f_odd * (2 * k) * (2 * k + 1))
        f_even = f_odd * (2 * k)
        f_odd = f_even * (2 * k + 1)
        p = p * z
        cs += p / f_even
        s += p / f_odd
    c[0] = cs
    sn[0] = s
    dsn[0] = ds


cdef inline void _step(double w1, double w2, double h, double *S, double *dS) noexcept nogil:
    """One fourth-order Magnus step for y'' = w(x) y, plus its derivative in E.

    w = V - E, so dw/dE = -1 at both Gauss nodes.
    """
    cdef double o11 = SQRT3_12 * h * h * (w1 - w2)
    cdef double o12 = h
    cdef double o21 = 0.5 * h * (w1 + w2)
    cdef double z = o11 * o11 + o12 * o21
    cdef double c, sn, dsn, r
    if fabs(z) < 0.5:
        _series(z, &c, &sn, &dsn)
    elif z > 0.0:
        r = sqrt(z)
        c = cosh(r)
        sn = sinh(r) / r
        dsn = (c - sn) / (2.0 * z)
    else:
        r = sqrt(-z)
        c = cos(r)
        sn = sin(r) / r
        dsn = (c - sn) / (2.0 * z)
    # S = c I + sn Omega
    S[0] = c + sn * o11
    S[1] = sn * o12
    S[2] = sn * o21
    S[3] = c - sn * o11
    # dz/dE = o12 * d(o21)/dE = -h^2 ; dc/dz = sn / 2
    cdef double dz = -h * h
    cdef double dc = 0.5 * sn * dz
    cdef double dsz = dsn * dz
    dS[0] = dc + dsz * o11
    dS[1] = dsz * o12
    dS[2] = dsz * o21 - sn * h
    dS[3] = dc - dsz * o11


def sturm_count(const double[::1] diag, const double[::1] off2, double E, double pivmin):
    """Number of eigenvalues strictly below E of the symmetric tridiagonal matrix.

    ``off2`` holds the squared off-diagonal entries.
    """
    cdef Py_ssize_t n = diag.shape[0], i
    cdef long count = 0
    cdef double d
    with nogil:
        d = diag[0] - E
        if fabs(d) < pivmin:
            d = -pivmin
        if d < 0.0:
            count += 1
        for i in range(1, n):
            d = (diag[i] - E) - off2[i - 1] / d
            if fabs(d) < pivmin:
                d = -pivmin
            if d < 0.0:
                count += 1
    return count


def sturm_count_many(const double[::1] diag, const double[::1] off2, const double[::1] shifts,
                     double pivmin):
    cdef Py_ssize_t m = shifts.shape[0], j
    out = np.empty(m, dtype=np.int64)
    cdef long long[::1] ov = out
    for j in range(m):
        ov[j] = sturm_count(diag, off2, shifts[j], pivmin)
    return out


def magnus_transfer(const double[::1] v1, const double[::1] v2, double h, double E):
    """Ordered product of Magnus step propagators and its E-derivative.

    Returns (Y, dY), 2x2 arrays with Y = S_n ... S_1.
    """
    cdef Py_ssize_t n = v1.shape[0], k
    cdef double S[4]
    cdef double dS[4]
    cdef double Y[4]
    cdef double dY[4]
    cdef double a, b, c, d, da, db, dc, dd
    Y[0] = 1.0; Y[1] = 0.0; Y[2] = 0.0; Y[3] = 1.0
    dY[0] = 0.0; dY[1] = 0.0; dY[2] = 0.0; dY[3] = 0.0
    with nogil:
        for k in range(n):
            _step(v1[k] - E, v2[k] - E, h, S, dS)
            # dY <- dS Y + S dY
            da = dS[0] * Y[0] + dS[1] * Y[2] + S[0] * dY[0] + S[1] * dY[2]
            db = dS[0] * Y[1] + dS[1] * Y[3] + S[0] * dY[1] + S[1] * dY[3]
            dc = dS[2] * Y[0] + dS[3] * Y[2] + S[2] * dY[0] + S[3] * dY[2]
            dd = dS[2] * Y[1] + dS[3] * Y[3] + S[2] * dY[1] + S[3] * dY[3]
            a = S[0] * Y[0] + S[1] * Y[2]
            b = S[0] * Y[1] + S[1] * Y[3]
            c = S[2] * Y[0] + S[3] * Y[2]
            d = S[2] * Y[1] + S[3] * Y[3]
            Y[0] = a; Y[1] = b; Y[2] = c; Y[3] = d
            dY[0] = da; dY[1] = db; dY[2] = dc; dY[3] = dd
    return (np.array([[Y[0], Y[1]], [Y[2], Y[3]]]),
            np.array([[dY[0], dY[1]], [dY[2], dY[3]]]))


def magnus_orbit(const double[::1] v1, const double[::1] v2, double h, double E,
                 double y0, double yp0):
    """States (y, y') at every step node, starting from (y0, yp0)."""
    cdef Py_ssize_t n = v1.shape[0], k
    out = np.empty((n + 1, 2), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef double S[4]
    cdef double dS[4]
    cdef double y = y0, yp = yp0, t
    ov[0, 0] = y
    ov[0, 1] = yp
    with nogil:
        for k in range(n):
            _step(v1[k] - E, v2[k] - E, h, S, dS)
            t = S[0] * y + S[1] * yp
            yp = S[2] * y + S[3] * yp
            y = t
            ov[k + 1, 0] = y
            ov[k + 1, 1] = yp
    return out
