"""Pure-Python/numpy twins of the compiled kernels.

Same call signatures and results as :mod:`gapmodes._ckernels` up to rounding.
The Sturm recurrence is vectorized over shifts; the Magnus product is reduced
pairwise so that its cost is dominated by numpy array operations.
"""

from __future__ import annotations

import numpy as np

SQRT3_12 = np.sqrt(3.0) / 12.0

# Taylor coefficients of cosh(sqrt z), sinh(sqrt z)/sqrt z
_K = np.arange(12)
_C_COEF = np.array([1.0 / np.prod(np.arange(1, 2 * k + 1, dtype=float)) for k in _K])
_S_COEF = np.array([1.0 / np.prod(np.arange(1, 2 * k + 2, dtype=float)) for k in _K])


def _series(z):
    c = np.polynomial.polynomial.polyval(z, _C_COEF)
    sn = np.polynomial.polynomial.polyval(z, _S_COEF)
    dsn = np.polynomial.polynomial.polyval(z, _S_COEF[1:] * _K[1:])
    return c, sn, dsn


def step_matrices(v1, v2, h, E):
    """Per-step propagators S_k and dS_k/dE, shape (n, 2, 2)."""
    w1 = np.asarray(v1, dtype=float) - E
    w2 = np.asarray(v2, dtype=float) - E
    o11 = SQRT3_12 * h * h * (w1 - w2)
    o12 = h
    o21 = 0.5 * h * (w1 + w2)
    z = o11 * o11 + o12 * o21
    small = np.abs(z) < 0.5
    c = np.empty_like(z)
    sn = np.empty_like(z)
    dsn = np.empty_like(z)
    if small.any():
        c[small], sn[small], dsn[small] = _series(z[small])
    pos = (~small) & (z > 0)
    if pos.any():
        r = np.sqrt(z[pos])
        c[pos] = np.cosh(r)
        sn[pos] = np.sinh(r) / r
    neg = (~small) & (z <= 0)
    if neg.any():
        r = np.sqrt(-z[neg])
        c[neg] = np.cos(r)
        sn[neg] = np.sin(r) / r
    big = ~small
    dsn[big] = (c[big] - sn[big]) / (2.0 * z[big])

    n = z.shape[0]
    S = np.empty((n, 2, 2))
    S[:, 0, 0] = c + sn * o11
    S[:, 0, 1] = sn * o12
    S[:, 1, 0] = sn * o21
    S[:, 1, 1] = c - sn * o11
    dz = -h * h
    dc = 0.5 * sn * dz
    dsz = dsn * dz
    dS = np.empty((n, 2, 2))
    dS[:, 0, 0] = dc + dsz * o11
    dS[:, 0, 1] = dsz * o12
    dS[:, 1, 0] = dsz * o21 - sn * h
    dS[:, 1, 1] = dc - dsz * o11
    return S, dS


def magnus_transfer(v1, v2, h, E):
    S, dS = step_matrices(v1, v2, h, E)
    if S.shape[0] == 0:
        return np.eye(2), np.zeros((2, 2))
    # pairwise reduction, later factor on the left: (B, B') * (A, A') = (BA, B'A + BA')
    while S.shape[0] > 1:
        if S.shape[0] % 2:
            S = np.concatenate([S, np.eye(2)[None]])
            dS = np.concatenate([dS, np.zeros((1, 2, 2))])
        A, dA = S[0::2], dS[0::2]
        B, dB = S[1::2], dS[1::2]
        S = B @ A
        dS = dB @ A + B @ dA
    return S[0].copy(), dS[0].copy()


def magnus_orbit(v1, v2, h, E, y0, yp0):
    S, _ = step_matrices(v1, v2, h, E)
    n = S.shape[0]
    out = np.empty((n + 1, 2))
    y = np.array([y0, yp0], dtype=float)
    out[0] = y
    for k in range(n):
        y = S[k] @ y
        out[k + 1] = y
    return out


def sturm_count_many(diag, off2, shifts, pivmin):
    diag = np.asarray(diag, dtype=float)
    off2 = np.asarray(off2, dtype=float)
    E = np.asarray(shifts, dtype=float)
    d = diag[0] - E
    d = np.where(np.abs(d) < pivmin, -pivmin, d)
    count = (d < 0).astype(np.int64)
    for i in range(1, diag.shape[0]):
        d = (diag[i] - E) - off2[i - 1] / d
        d = np.where(np.abs(d) < pivmin, -pivmin, d)
        count += d < 0
    return count


def sturm_count(diag, off2, E, pivmin):
    return int(sturm_count_many(diag, off2, np.array([E]), pivmin)[0])
