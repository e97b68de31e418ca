"""Gelfand-Bloch transform on sampled, rapidly decaying functions.

    ftilde(x; k) = sum_n exp(2 pi i n x) fhat(k + n) = sum_m exp(-2 pi i k (x + m)) f(x + m)

ftilde is one-periodic in x and pseudo-periodic in k,
ftilde(x; k + 1) = exp(-2 pi i x) ftilde(x; k). It is stored as the x-Fourier
coefficients c_n(k) = fhat(k + n), n = -P/2 .. P/2 - 1, where P = 1/dx is the
number of samples per period.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .sampled import SampledFunction, uniform_grid


def bloch_k_grid(K: int = 256) -> np.ndarray:
    """K uniform points on (-1/2, 1/2]."""
    return -0.5 + np.arange(1, K + 1) / K


def sample(f, X: float = 40.0, dx: float = 1.0 / 64) -> SampledFunction:
    return SampledFunction.on_grid(lambda x: np.asarray(f(x), dtype=complex), X, dx)


def _check_grid(f: SampledFunction):
    P = 1.0 / f.h
    if abs(P - round(P)) > 1e-9 or abs(f.X - round(f.X)) > 1e-12:
        raise ValueError("grid needs an integer number of samples per period and integer X")
    return int(round(P)), int(round(f.X))


@dataclass(frozen=True)
class BlochTransform:
    k: np.ndarray  # (K,)
    coeffs: np.ndarray  # (K, P), column i <-> n = i - P/2
    X: int

    @property
    def P(self) -> int:
        return self.coeffs.shape[1]

    @property
    def n(self) -> np.ndarray:
        return np.arange(self.P) - self.P // 2

    def values(self) -> np.ndarray:
        """ftilde(x_s; k) on x_s = s / P, s = 0..P-1, shape (K, P)."""
        P = self.P
        # sum_n c_n e^{2 pi i n s / P}
        shifted = np.roll(self.coeffs, -(P // 2), axis=1)  # index 0 <-> n = 0
        return np.fft.ifft(shifted, axis=1) * P

    @classmethod
    def from_values(cls, k, vals, X) -> "BlochTransform":
        P = vals.shape[1]
        c = np.fft.fft(vals, axis=1) / P
        return cls(k, np.roll(c, P // 2, axis=1), X)

    def __add__(self, other):
        return BlochTransform(self.k, self.coeffs + other.coeffs, self.X)

    def __mul__(self, a):
        return BlochTransform(self.k, a * self.coeffs, self.X)

    __rmul__ = __mul__

    def heatmap_csv(self, proj: np.ndarray, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["b", "k", "magnitude"])
        for b in range(proj.shape[0]):
            for j, kk in enumerate(self.k):
                w.writerow([b, repr(float(kk)), repr(float(abs(proj[b, j])))])
        return buf.getvalue()


def gelfand_transform(f: SampledFunction, k_grid=None, decay_tol: float = 1e-12) -> BlochTransform:
    """Frequency slicing: fhat(k + n) read off the FFT of f exp(-2 pi i k x) every 2X-th bin."""
    k_grid = bloch_k_grid() if k_grid is None else np.asarray(k_grid, float)
    P, X = _check_grid(f)
    v = np.asarray(f.values, dtype=complex)
    scale = max(float(np.max(np.abs(v))), 1e-300)
    if max(abs(v[0]), abs(v[-1])) > decay_tol * scale:
        raise ValueError("function has not decayed at the window boundary (aliasing)")
    N = v.size
    n = np.arange(P) - P // 2
    bins = (2 * X * n) % N
    x = f.x
    out = np.empty((k_grid.size, P), dtype=complex)
    for j, k in enumerate(k_grid):
        F = np.fft.fft(v * np.exp(-2j * np.pi * k * x))
        # fhat(xi) = dx * sum_m f(x_m) e^{-2 pi i xi x_m}, x_m = -X + m dx
        # the remaining phase exp(2 pi i n X) is 1 for integer n and X
        out[j] = f.h * F[bins]
    return BlochTransform(k_grid, out, X)


def poisson_values(f: SampledFunction, k_grid) -> np.ndarray:
    """ftilde(x_s; k) from the lattice sum, x_s = s / P, shape (K, P)."""
    P, X = _check_grid(f)
    v = np.asarray(f.values, dtype=complex).reshape(2 * X, P)  # row r: x = -X + r + s/P
    m = np.arange(2 * X) - X
    xs = np.arange(P) / P
    out = np.empty((len(k_grid), P), dtype=complex)
    for j, k in enumerate(k_grid):
        ph = np.exp(-2j * np.pi * k * (m[:, None] + xs[None, :]))
        out[j] = np.sum(ph * v, axis=0)
    return out


def _uniform(k):
    d = np.diff(k)
    return d.size > 0 and np.allclose(d, d[0], rtol=1e-12, atol=0) and abs(k.size * d[0] - 1) < 1e-12


def inverse_transform(F: BlochTransform) -> SampledFunction:
    """f(x) = int exp(2 pi i x k) ftilde(x; k) dk, periodic trapezoid in k."""
    if not _uniform(F.k):
        raise ValueError("inverse transform needs a uniform k-grid covering one period")
    vals = F.values()  # (K, P)
    X, P = F.X, F.P
    x = uniform_grid(X, 1.0 / P)
    rows = x.reshape(2 * X, P)
    out = np.zeros((2 * X, P), dtype=complex)
    for j, k in enumerate(F.k):
        out += np.exp(2j * np.pi * k * rows) * vals[j][None, :]
    return SampledFunction(x, (out / F.k.size).ravel())


def bloch_convolution(F: BlochTransform, G: BlochTransform) -> BlochTransform:
    """int_{-1/2}^{1/2} ftilde(x; k - l) gtilde(x; l) dl, periodic trapezoid in l."""
    if F.k.shape != G.k.shape or np.any(F.k != G.k) or F.P != G.P:
        raise ValueError("transforms live on different grids")
    if not _uniform(F.k):
        raise ValueError("convolution needs a uniform k-grid")
    K, P = F.k.size, F.P
    fv, gv = F.values(), G.values()
    xs = np.arange(P) / P
    # k_j - l_i = (j - i) / K = k_r with r = j - i + K/2 - 1 (k_r = -1/2 + (r + 1)/K)
    if K % 2:
        raise ValueError("k-grid size must be even")
    i = np.arange(K)
    out = np.empty((K, P), dtype=complex)
    for j in range(K):
        q, rr = np.divmod(j - i + K // 2 - 1, K)
        fk = fv[rr] * np.exp(-2j * np.pi * np.multiply.outer(q, xs))
        out[j] = np.sum(fk * gv, axis=0) / K
    return BlochTransform.from_values(F.k, out, F.X)


def multiply_periodic(F: BlochTransform, V) -> BlochTransform:
    """V(x) ftilde(x; k) for a one-periodic V."""
    xs = np.arange(F.P) / F.P
    return BlochTransform.from_values(F.k, F.values() * np.asarray(V(xs))[None, :], F.X)


def derivative(F: BlochTransform) -> BlochTransform:
    """(d/dx + 2 pi i k) ftilde."""
    return BlochTransform(F.k, 2j * np.pi * (F.k[:, None] + F.n[None, :]) * F.coeffs, F.X)


def _band_coeffs(bands, P):
    """Bloch parts (K, nb, P) padded to the transform's mode range."""
    M = bands.M
    if P // 2 + M + 1 > P:
        raise ValueError("transform cutoff is below the band cutoff")
    K, nb = bands.energies.shape
    out = np.zeros((K, nb, P), dtype=complex)
    out[:, :, P // 2 - M:P // 2 + M + 1] = bands.p_coeffs
    return out


def project_modes(F: BlochTransform, bands) -> np.ndarray:
    """T_b{f}(k) = <p_b(.; k), ftilde(.; k)>, shape (n_bands, K)."""
    if bands.k_grid.shape != F.k.shape or np.max(np.abs(bands.k_grid - F.k)) > 1e-14:
        raise ValueError("band structure and transform use different k-grids")
    pc = _band_coeffs(bands, F.P)
    return np.einsum("kbn,kn->bk", pc.conj(), F.coeffs)


def reconstruct(F: BlochTransform, bands, proj: np.ndarray) -> BlochTransform:
    pc = _band_coeffs(bands, F.P)
    return BlochTransform(F.k, np.einsum("bk,kbn->kn", proj, pc), F.X)


def completeness_residual(F: BlochTransform, bands) -> float:
    proj = project_modes(F, bands)
    R = reconstruct(F, bands, proj)
    return float(np.max(np.abs(R.coeffs - F.coeffs)) / max(np.max(np.abs(F.coeffs)), 1e-300))


def l2_norm_sq(f: SampledFunction) -> float:
    return float(np.sum(np.abs(f.values) ** 2) * f.h)


def xs_norm(F: BlochTransform, bands, s: float):
    """Squared X^s norm: sum_b (1 + b^2)^s int |T_b|^2 dk, plus a tail estimate.

    The tail is extrapolated geometrically from the last octave of bands.
    Returns (truncated_sum, tail, terms).
    """
    proj = project_modes(F, bands)
    nb = proj.shape[0]
    b = np.arange(nb)
    terms = (1.0 + b * b) ** s * np.mean(np.abs(proj) ** 2, axis=1)
    total = float(terms.sum())
    lo = max(1, nb // 2)
    tail_terms = terms[lo:]
    tail = 0.0
    pos = tail_terms > 0
    if pos.sum() >= 2:
        r = math.exp(np.polyfit(b[lo:][pos], np.log(tail_terms[pos]), 1)[0])
        tail = math.inf if r >= 1 else float(tail_terms[-1] * r / (1 - r))
    return total, tail, terms


def hs_norm_sq(f: SampledFunction, s: float) -> float:
    """int (1 + xi^2)^s |fhat(xi)|^2 d xi (xi in cycles per unit length)."""
    xi, fh = f.fourier()
    dxi = 1.0 / (f.n * f.h)
    return float(np.sum((1 + xi * xi) ** s * np.abs(fh) ** 2) * dxi)
