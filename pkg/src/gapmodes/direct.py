"""Finite-difference ground truth for defect modes in a spectral gap.

The operator -d^2/dx^2 + V on [-L, L] with Dirichlet ends is discretized on a
(possibly graded) node set by the finite-volume stencil

    (1/w_i) [ (psi_i - psi_{i-1}) / h_{i-1/2} - (psi_{i+1} - psi_i) / h_{i+1/2} ] + V_i psi_i,

w_i = (h_{i-1/2} + h_{i+1/2}) / 2, and symmetrized by W^{1/2}. On a uniform grid
this is the standard 2/h^2, -1/h^2 stencil. Eigenvalues in a gap are isolated
by Sturm counting and bisection; eigenvectors come from inverse iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from . import kernels
from .potentials import ConfigError, PeriodicPotential


class NoDefectModeError(RuntimeError):
    pass


class AmbiguityError(RuntimeError):
    pass


class StagnationError(RuntimeError):
    pass


@dataclass
class TruncatedHamiltonian:
    x: np.ndarray  # interior nodes
    diag: np.ndarray
    off: np.ndarray  # symmetric off-diagonal, length n-1
    w: np.ndarray  # node weights (cell widths)
    L: float
    h: float  # finest step
    off2: np.ndarray = field(init=False, repr=False)
    pivmin: float = field(init=False, repr=False)

    def __post_init__(self):
        self.off2 = self.off * self.off
        self.pivmin = np.finfo(float).tiny * max(1.0, float(np.max(self.off2, initial=0.0)))

    @property
    def n(self) -> int:
        return self.diag.size

    def gershgorin(self):
        r = np.zeros(self.n)
        r[:-1] += np.abs(self.off)
        r[1:] += np.abs(self.off)
        return float(np.min(self.diag - r)), float(np.max(self.diag + r))

    def matvec(self, v):
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def shifted(self, c: float) -> "TruncatedHamiltonian":
        return TruncatedHamiltonian(self.x, self.diag + c, self.off, self.w, self.L, self.h)


def _from_nodes(xn: np.ndarray, V: np.ndarray, L: float) -> TruncatedHamiltonian:
    """Symmetrized stencil on interior nodes xn[1:-1] of the full node set xn (ends Dirichlet)."""
    hs = np.diff(xn)
    w = 0.5 * (hs[:-1] + hs[1:])
    diag = (1.0 / hs[:-1] + 1.0 / hs[1:]) / w + V
    off = -1.0 / (hs[1:-1] * np.sqrt(w[:-1] * w[1:]))
    return TruncatedHamiltonian(xn[1:-1], diag, off, w, L, float(hs.min()))


def assemble(Q: PeriodicPotential, q, L: float, h: float, decay_tol: float = 1e-10
             ) -> TruncatedHamiltonian:
    """Uniform grid on [-L, L]: diag 2/h^2 + Q + q, off-diagonal -1/h^2."""
    n = int(round(2 * L / h))
    if abs(n * h - 2 * L) > 1e-9 * L:
        raise ConfigError("L must be commensurate with h")
    if not Q.is_zero:
        per = 1.0 / h
        if abs(per - round(per)) > 1e-9 or abs(L - round(L)) > 1e-12:
            raise ConfigError("grid must be commensurate with the period")
    xn = -L + np.arange(n + 1) * (2 * L / n)
    xi = xn[1:-1]
    qv = np.zeros_like(xi) if q is None else np.asarray(q(xi), float)
    if q is not None:
        edge = np.abs(np.asarray(q(np.array([-L, L])), float))
        if np.max(edge) > decay_tol:
            raise ConfigError("perturbation has not decayed at the domain boundary")
    V = (0.0 if Q.is_zero else Q(xi)) + qv
    diag = np.full(xi.size, 2.0 / h ** 2) + V
    off = np.full(xi.size - 1, -1.0 / h ** 2)
    w = np.full(xi.size, 2 * L / n)
    return TruncatedHamiltonian(xi, diag, off, w, L, 2 * L / n)


def graded_nodes(R: float, h: float, L: float, H_max: float, ratio: float = 1.02) -> np.ndarray:
    """Uniform step h on [-R, R], geometric growth up to H_max, then uniform to +-L."""
    n_in = int(round(2 * R / h))
    inner = -R + np.arange(n_in + 1) * (2 * R / n_in)
    h = 2 * R / n_in
    right = [R]
    step = h
    while right[-1] < L:
        step = min(step * ratio, H_max)
        right.append(right[-1] + step)
    right = np.array(right)
    # stretch the last cell onto L
    right[-1] = L
    if right[-1] - right[-2] < 0.5 * step:
        right = np.delete(right, -2)
    right = right[1:]
    return np.concatenate([-right[::-1], inner, right])


def assemble_graded(q, R: float, h: float, L: float, H_max: float, ratio: float = 1.02,
                    decay_tol: float = 1e-10) -> TruncatedHamiltonian:
    """Q = 0 only: fine uniform grid where q lives, geometrically coarsened exterior."""
    if q is not None and np.max(np.abs(q(np.array([-R, R])))) > decay_tol:
        raise ConfigError("perturbation has not decayed at the fine-grid boundary")
    xn = graded_nodes(R, h, L, H_max, ratio)
    xi = xn[1:-1]
    V = np.zeros_like(xi) if q is None else np.where(np.abs(xi) <= R, q(np.clip(xi, -R, R)), 0.0)
    return _from_nodes(xn, V, L)


def count_below(H: TruncatedHamiltonian, E: float) -> int:
    """Number of eigenvalues strictly below E (Sturm sequence)."""
    return kernels.sturm_count(H.diag, H.off2, E, H.pivmin)


def bisect_eigenvalue(H: TruncatedHamiltonian, j: int, lo: float, hi: float, tol: float = 0.0
                      ) -> float:
    """The j-th eigenvalue (0-based) known to lie in (lo, hi]."""
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or (tol > 0 and hi - lo <= tol):
            return 0.5 * (lo + hi) if tol > 0 else hi
        if count_below(H, mid) > j:
            hi = mid
        else:
            lo = mid


def eigenvalues_in(H: TruncatedHamiltonian, lo: float, hi: float, tol: float = 0.0):
    c_lo, c_hi = count_below(H, lo), count_below(H, hi)
    return [bisect_eigenvalue(H, j, lo, hi, tol) for j in range(c_lo, c_hi)]


def _tridiag_solve(H, shift, rhs):
    dl = H.off.copy()
    d = H.diag - shift
    du = H.off.copy()
    _, _, _, x, info = lapack.dgtsv(dl, d, du, rhs)
    if info != 0:
        raise StagnationError(f"dgtsv failed (info={info})")
    return x


def inverse_iteration(H: TruncatedHamiltonian, E: float, n_iter: int = 4, seed: int = 0):
    """Eigenvector near E; two shifts (E and E nudged by a few ulps), smaller residual kept."""
    rng = np.random.default_rng(seed)
    start = rng.standard_normal(H.n)
    best = None
    nudge = max(8 * np.spacing(abs(E) + 1e-300), 1e-15 * (1 + abs(E)))
    for shift in (E, E + nudge):
        v = start / np.linalg.norm(start)
        for _ in range(n_iter):
            y = _tridiag_solve(H, shift, v)
            nrm = np.linalg.norm(y)
            if not np.isfinite(nrm) or nrm == 0:
                break
            v = y / nrm
        rq = float(v @ H.matvec(v))
        res = float(np.linalg.norm(H.matvec(v) - rq * v))
        if best is None or res < best[1]:
            best = (v, res, rq)
    if best is None or not np.isfinite(best[1]):
        raise StagnationError("inverse iteration stagnated")
    return best


@dataclass
class DefectMode:
    E_eps: float
    x: np.ndarray
    psi: np.ndarray  # L2-normalized samples of the eigenfunction
    residual: float
    rayleigh: float
    localization_length: float
    H: TruncatedHamiltonian = field(repr=False, default=None)

    def normalized_to(self, pred_at_xn: float, x_n: float) -> np.ndarray:
        """psi scaled so that psi(x_n) equals the predicted value there."""
        val = float(np.interp(x_n, self.x, self.psi))
        return self.psi * (pred_at_xn / val)


def boundary_mass_fraction(H: TruncatedHamiltonian, phi: np.ndarray, outer: float = 0.1) -> float:
    """Fraction of L2 mass of the eigenvector phi (symmetrized basis) in the outer part."""
    m = phi * phi
    far = np.abs(H.x) > (1 - outer) * H.L
    return float(m[far].sum() / m.sum())


def boundary_artifact_filter(H: TruncatedHamiltonian, candidates, max_fraction: float = 0.01):
    """Drop (E, phi) candidates with more than 1% of their mass in the outer 10% of [-L, L]."""
    return [(E, phi) for E, phi in candidates if boundary_mass_fraction(H, phi) <= max_fraction]


def fit_localization_length(x, psi, periodic: bool, core: float = 0.0) -> float:
    """1/kappa from a straight-line fit of log|psi| against |x| on the tails."""
    a = np.abs(psi)
    peak = a.max()
    if periodic:
        # envelope: max over unit cells
        cells = np.floor(x)
        uc, inv = np.unique(cells, return_inverse=True)
        env = np.zeros(uc.size)
        np.maximum.at(env, inv, a)
        xc, ac = uc + 0.5, env
    else:
        xc, ac = x, a
    sel = (np.abs(xc) > core) & (ac < 0.5 * peak) & (ac > 1e-6 * peak)
    if sel.sum() < 4:
        return math.nan
    slope = np.polyfit(np.abs(xc[sel]), np.log(ac[sel]), 1)[0]
    return float(-1.0 / slope)


def gap_eigenvalue(H: TruncatedHamiltonian, gap, edge_exclusion: float | None = None,
                   tol: float = 0.0, max_fraction: float = 0.01):
    """The unique boundary-filtered eigenvalue in (gap.lo + delta, gap.hi].

    ``gap`` is (lo, hi); lo may be -inf (region below the spectrum). The upper end
    is used as is: it should be the discrete band edge. Returns (E, phi).
    """
    lo, hi = gap
    if not np.isfinite(lo):
        lo = H.gershgorin()[0] - 1.0
        delta = 0.0
    else:
        delta = 1e-4 * (hi - lo) if edge_exclusion is None else edge_exclusion
    a = lo + delta
    Es = eigenvalues_in(H, a, hi, tol)
    if not Es:
        raise NoDefectModeError("no eigenvalue inside the gap")
    cands = []
    for E in Es:
        v, res, rq = inverse_iteration(H, E)
        cands.append((E, v))
    kept = boundary_artifact_filter(H, cands, max_fraction)
    if not kept:
        raise NoDefectModeError("only boundary-localized eigenvalues inside the gap")
    if len(kept) > 1:
        raise AmbiguityError(f"{len(kept)} interior eigenvalues in the gap: {[e for e, _ in kept]}")
    return kept[0]


def eigenvector(H: TruncatedHamiltonian, E: float, periodic: bool = False, core: float = 0.0
                ) -> DefectMode:
    v, res, rq = inverse_iteration(H, E)
    psi = v / np.sqrt(H.w)  # back from the symmetrized basis; sum w psi^2 = 1
    i = int(np.argmax(np.abs(psi)))
    if psi[i] < 0:
        psi = -psi
    ell = fit_localization_length(H.x, psi, periodic, core)
    return DefectMode(E, H.x, psi, res, rq, ell, H)


def discrete_band_edge(Q: PeriodicPotential, h: float, k_star: float, b: int) -> float:
    """b-th eigenvalue of the one-period FD operator with (anti)periodic closure."""
    n = int(round(1.0 / h))
    x = np.arange(n) * h
    A = np.diag(2.0 / h ** 2 + Q(x)) - np.diag(np.full(n - 1, 1.0 / h ** 2), 1) \
        - np.diag(np.full(n - 1, 1.0 / h ** 2), -1)
    s = 1.0 if abs(k_star) < 0.25 else -1.0
    A[0, -1] -= s / h ** 2
    A[-1, 0] -= s / h ** 2
    return float(np.linalg.eigvalsh(A)[b])


def domain_half_width(alpha0: float, eps: float, periods: int = 30) -> float:
    return max(12.0 / (abs(alpha0) * eps * eps), float(periods))
