"""Uniformly sampled functions on a periodic window [-X, X)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SampledFunction:
    x: np.ndarray
    values: np.ndarray

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def X(self) -> float:
        return float(-self.x[0])

    @property
    def n(self) -> int:
        return self.x.size

    @classmethod
    def on_grid(cls, f, X: float, h: float) -> "SampledFunction":
        x = uniform_grid(X, h)
        return cls(x, np.asarray(f(x)))

    def fourier(self):
        """Continuous-transform samples fhat(xi) = int f e^{-2 pi i x xi} dx on the dual grid."""
        n = self.n
        xi = np.fft.fftfreq(n, d=self.h)
        # shift the origin to x = -X
        fh = np.fft.fft(self.values) * self.h * np.exp(2j * np.pi * xi * self.X)
        return xi, fh

    @classmethod
    def from_fourier(cls, x: np.ndarray, xi: np.ndarray, fh: np.ndarray) -> "SampledFunction":
        h = x[1] - x[0]
        X = -x[0]
        vals = np.fft.ifft(fh * np.exp(-2j * np.pi * xi * X)) / h
        return cls(x, vals)

    def integral(self) -> complex:
        return complex(np.sum(self.values) * self.h)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def uniform_grid(X: float, h: float) -> np.ndarray:
    """Points -X + j h, j = 0..n-1 with n = round(2X/h); 2X/h must be (close to) an integer."""
    n = int(round(2 * X / h))
    if abs(n * h - 2 * X) > 1e-9 * X:
        raise ValueError("2X must be an integer multiple of the step")
    return -X + np.arange(n) * (2 * X / n)
