"""One-periodic real potentials given by a finite Fourier series."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np


class ConfigError(ValueError):
    """Malformed or inconsistent user input."""


@dataclass(frozen=True, eq=False)
class PeriodicPotential:
    """Q(x) = sum_{|n|<=N} Qhat_n exp(2 pi i n x), period 1.

    ``coeffs[N + n]`` holds Qhat_n. Conjugate symmetry is enforced at
    construction so that Q is real and the Bloch matrix is exactly Hermitian.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size % 2 != 1:
            raise ConfigError("coefficient vector must have odd length 2N+1")
        N = c.size // 2
        for n in range(0, N + 1):
            a, b = c[N + n], c[N - n]
            if abs(a - np.conj(b)) > 1e-12 * (1 + abs(a)):
                raise ConfigError(f"Qhat_{-n} is not conj(Qhat_{n}); Q would be complex")
        out = c.copy()
        out[N] = c[N].real
        for n in range(1, N + 1):
            out[N - n] = np.conj(out[N + n])
        # trim trailing zero harmonics
        while out.size > 1 and out[0] == 0 and out[-1] == 0:
            out = out[1:-1]
        out.setflags(write=False)
        object.__setattr__(self, "coeffs", out)

    def __eq__(self, other):
        if not isinstance(other, PeriodicPotential):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    @property
    def N(self) -> int:
        return self.coeffs.size // 2

    def hat(self, n: int) -> complex:
        N = self.N
        return complex(self.coeffs[N + n]) if abs(n) <= N else 0j

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        n = np.arange(-self.N, self.N + 1)
        ph = np.exp(2j * np.pi * np.multiply.outer(x, n))
        return (ph @ self.coeffs).real

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        n = np.arange(-self.N, self.N + 1)
        ph = np.exp(2j * np.pi * np.multiply.outer(x, n))
        return (ph @ (2j * np.pi * n * self.coeffs)).real

    def sup_norm(self, samples: int = 4096) -> float:
        return float(np.max(np.abs(self(np.arange(samples) / samples))))

    def shifted(self, c: float) -> "PeriodicPotential":
        out = np.array(self.coeffs)
        out[self.N] += c
        return PeriodicPotential(out)

    # construction helpers
    @classmethod
    def zero(cls) -> "PeriodicPotential":
        return cls(np.zeros(1))

    @classmethod
    def from_fourier(cls, terms: Mapping[int, complex] | Iterable) -> "PeriodicPotential":
        """Build from {n: Qhat_n} or [[n, re, im], ...]; missing -n filled by conjugation."""
        if isinstance(terms, Mapping):
            items = [(int(n), complex(v)) for n, v in terms.items()]
        else:
            items = []
            for row in terms:
                if len(row) != 3:
                    raise ConfigError("fourier rows must be [n, re, im]")
                items.append((int(row[0]), complex(float(row[1]), float(row[2]))))
        if not items:
            return cls.zero()
        N = max(abs(n) for n, _ in items)
        c = np.full(2 * N + 1, np.nan + 0j)
        for n, v in items:
            if not np.isnan(c[N + n]) and c[N + n] != v:
                raise ConfigError(f"harmonic {n} given twice")
            c[N + n] = v
        for n in range(-N, N + 1):
            if np.isnan(c[N + n]):
                m = c[N - n]
                c[N + n] = 0 if np.isnan(m) else np.conj(m)
        if not np.all(np.isfinite(c)):
            raise ConfigError("non-finite Fourier coefficient")
        return cls(c)

    @classmethod
    def from_samples(cls, values, N: int) -> "PeriodicPotential":
        """Uniform samples on [0, 1) projected onto harmonics |n| <= N."""
        v = np.asarray(values, dtype=float)
        if v.size < 2 * N + 1:
            raise ConfigError("need at least 2N+1 samples")
        f = np.fft.fft(v) / v.size
        n = np.arange(-N, N + 1)
        c = f[n % v.size]
        return cls(c)

    @classmethod
    def mathieu(cls, amplitude: float = 2.0) -> "PeriodicPotential":
        """amplitude * cos(2 pi x)."""
        return cls.from_fourier({1: amplitude / 2, -1: amplitude / 2})

    @classmethod
    def from_json(cls, doc) -> "PeriodicPotential":
        if isinstance(doc, str):
            doc = json.loads(doc)
        if not isinstance(doc, dict) or "fourier" not in doc:
            raise ConfigError('potential JSON needs a "fourier" list')
        return cls.from_fourier(doc["fourier"])

    def to_json(self) -> dict:
        N = self.N
        return {"fourier": [[n, float(self.coeffs[N + n].real), float(self.coeffs[N + n].imag)]
                            for n in range(-N, N + 1) if self.coeffs[N + n] != 0]}
