"""Floquet-Bloch spectrum of -d^2/dx^2 + Q in a truncated plane-wave basis.

For each quasimomentum k the periodic part p(x; k) = sum_n c_n exp(2 pi i n x)
solves the Hermitian eigenproblem

    H_mn(k) = 4 pi^2 (m + k)^2 delta_mn + Qhat_{m-n},   |m|, |n| <= M.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .potentials import PeriodicPotential

TWO_PI = 2.0 * np.pi
FOUR_PI2 = 4.0 * np.pi ** 2


class BandEdgeError(ValueError):
    """The requested band edge violates a band-edge property numerically."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class EigenSolverError(RuntimeError):
    pass


def default_cutoff(Q: PeriodicPotential) -> int:
    return max(32, 4 * Q.N)


def assemble_bloch_matrix(Q: PeriodicPotential, k: float, M: int) -> np.ndarray:
    """Hermitian (2M+1)x(2M+1) Bloch matrix; index i <-> Fourier mode n = i - M."""
    if M < Q.N:
        raise ValueError(f"cutoff M={M} is below the potential bandwidth N_Q={Q.N}")
    n = np.arange(-M, M + 1)
    size = 2 * M + 1
    # Toeplitz with column Qhat_{m-n} for m-n >= 0 and row Qhat_{-(n-m)}
    col = np.zeros(size, dtype=complex)
    row = np.zeros(size, dtype=complex)
    for j in range(min(Q.N, size - 1) + 1):
        col[j] = Q.hat(j)
        row[j] = Q.hat(-j)
    H = scipy.linalg.toeplitz(col, row)
    H[np.diag_indices(size)] = FOUR_PI2 * (n + k) ** 2 + Q.hat(0).real
    return H


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    piv = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(piv) / piv)[None, :]


@dataclass(frozen=True)
class BlochEigenpair:
    b: int
    k: float
    E: float
    p_coeffs: np.ndarray  # modes -M..M
    residual: float = 0.0

    @property
    def M(self) -> int:
        return self.p_coeffs.size // 2

    def p(self, x):
        n = np.arange(-self.M, self.M + 1)
        return np.exp(TWO_PI * 1j * np.multiply.outer(np.asarray(x, float), n)) @ self.p_coeffs

    def u(self, x):
        x = np.asarray(x, float)
        return np.exp(TWO_PI * 1j * self.k * x) * self.p(x)

    def du(self, x):
        """d/dx of the Bloch wave u = exp(2 pi i k x) p."""
        x = np.asarray(x, float)
        n = np.arange(-self.M, self.M + 1)
        ph = np.exp(TWO_PI * 1j * np.multiply.outer(x, n + self.k))
        return ph @ (TWO_PI * 1j * (n + self.k) * self.p_coeffs)


def solve_bloch(Q: PeriodicPotential, k: float, M: int | None = None, n_bands: int = 6):
    """Lowest ``n_bands`` Bloch eigenpairs at quasimomentum k, sorted by energy."""
    M = default_cutoff(Q) if M is None else M
    if n_bands > 2 * M:
        raise ValueError("n_bands must not exceed 2M")
    H = assemble_bloch_matrix(Q, k, M)
    try:
        w, v = scipy.linalg.eigh(H, subset_by_index=[0, n_bands - 1], driver="evr")
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise EigenSolverError(str(exc)) from exc
    v = _fix_phase(v)
    res = np.linalg.norm(H @ v - v * w[None, :], axis=0)
    bad = res > 1e-9 * (1 + np.abs(w))
    if np.any(bad):
        raise EigenSolverError(f"eigen-residual too large: {res[bad].max():.3e}")
    return [BlochEigenpair(b, float(k), float(w[b]), v[:, b].copy(), float(res[b]))
            for b in range(n_bands)]


def bloch_energies(Q: PeriodicPotential, k: float, M: int, n_bands: int) -> np.ndarray:
    H = assemble_bloch_matrix(Q, k, M)
    return scipy.linalg.eigh(H, eigvals_only=True, subset_by_index=[0, n_bands - 1])


def gap_tolerance(E: float) -> float:
    return 1e-8 * (1.0 + abs(E))


@dataclass
class BandStructure:
    Q: PeriodicPotential
    M: int
    k_grid: np.ndarray
    energies: np.ndarray  # (nk, nb)
    p_coeffs: np.ndarray  # (nk, nb, 2M+1)
    gaps: list = field(default_factory=list)  # (b, lo, hi)
    crossings: list = field(default_factory=list)  # (b, k, separation)
    symmetry_error: float = 0.0
    orthonormality_error: float = 0.0

    @property
    def n_bands(self) -> int:
        return self.energies.shape[1]

    def eigenpair(self, ik: int, b: int) -> BlochEigenpair:
        return BlochEigenpair(b, float(self.k_grid[ik]), float(self.energies[ik, b]),
                              self.p_coeffs[ik, b])

    def gap_id(self, b: int) -> int:
        return b if any(g[0] == b for g in self.gaps) else -1

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "b", "E", "gap_id"])
        for ik, k in enumerate(self.k_grid):
            for b in range(self.n_bands):
                w.writerow([repr(float(k)), b, repr(float(self.energies[ik, b])), self.gap_id(b)])
        return buf.getvalue()


def default_k_grid(n: int = 64) -> np.ndarray:
    """n points on (-1/2, 1/2], containing 0 and 1/2 for even n."""
    return -0.5 + np.arange(1, n + 1) / n


def band_scan(Q: PeriodicPotential, k_grid=None, n_bands: int = 6, M: int | None = None,
              executor=None) -> BandStructure:
    """Dispersion curves, gauge-continuous Bloch parts and the open-gap inventory."""
    M = default_cutoff(Q) if M is None else M
    k_grid = default_k_grid() if k_grid is None else np.sort(np.asarray(k_grid, float))
    if executor is not None:
        results = list(executor.map(solve_bloch, [Q] * len(k_grid), k_grid,
                                    [M] * len(k_grid), [n_bands] * len(k_grid)))
    else:
        results = [solve_bloch(Q, k, M, n_bands) for k in k_grid]
    nk = len(k_grid)
    E = np.array([[pr.E for pr in r] for r in results])
    P = np.array([[pr.p_coeffs for pr in r] for r in results])

    # sign continuity along k
    for ik in range(1, nk):
        ov = np.einsum("bn,bn->b", P[ik - 1].conj(), P[ik]).real
        P[ik, ov < 0] *= -1

    ortho = 0.0
    for ik in range(nk):
        G = P[ik].conj() @ P[ik].T
        ortho = max(ortho, float(np.abs(G - np.eye(n_bands)).max()))

    sym = 0.0
    for ik, k in enumerate(k_grid):
        mk = -k
        if mk <= -0.5:
            mk += 1.0
        j = np.flatnonzero(np.abs(k_grid - mk) < 1e-14)
        if j.size:
            sym = max(sym, float(np.abs(E[ik] - E[j[0]]).max()))

    gaps, crossings = [], []
    for b in range(n_bands - 1):
        lo, hi = float(E[:, b].max()), float(E[:, b + 1].min())
        if hi - lo > gap_tolerance(0.5 * (lo + hi)):
            gaps.append((b, lo, hi))
        sep = E[:, b + 1] - E[:, b]
        for ik in np.flatnonzero(sep < gap_tolerance(float(E[:, b].max()))):
            k = float(k_grid[ik])
            if 0.0 < abs(k) < 0.5:
                crossings.append((b, k, float(sep[ik])))
    return BandStructure(Q, M, k_grid, E, P, gaps, crossings, sym, ortho)


@dataclass(frozen=True)
class BandEdge:
    b_star: int
    k_star: float
    E_star: float
    d2E: float
    edge_kind: str  # "lower" | "upper"
    u_star: np.ndarray  # samples on x_grid, real gauge
    x_grid: np.ndarray
    p_coeffs: np.ndarray
    dE: float
    d3E: float
    simplicity_margin: float
    gap: tuple  # (lo, hi) of the neighbouring open gap
    h_k: float
    d2E_halfstep: float
    M: int

    @property
    def A_eff(self) -> float:
        return self.d2E / (8.0 * np.pi ** 2)

    def eigenpair(self) -> BlochEigenpair:
        return BlochEigenpair(self.b_star, self.k_star, self.E_star, self.p_coeffs)


def _richardson_d2(f, k0, h, f0):
    def D(hh):
        return (f(k0 + hh) - 2.0 * f0 + f(k0 - hh)) / (hh * hh)

    return (4.0 * D(h / 2) - D(h)) / 3.0


def expected_edge_kind(b: int, k_star: float) -> str:
    """Even bands have their minimum at k=0 and maximum at k=1/2; odd bands the reverse."""
    at_zero = abs(k_star) < 0.25
    return "lower" if (b % 2 == 0) == at_zero else "upper"


def real_gauge(u: np.ndarray) -> np.ndarray:
    """Multiply by a unit phase so that u is as real as possible (exactly real if u is)."""
    s = np.sum(u * u)
    ph = np.exp(-0.5j * np.angle(s)) if abs(s) > 0 else 1.0
    v = u * ph
    i = np.argmax(np.abs(v))
    if v[i].real < 0:
        v = -v
    return v


def band_edge_analysis(Q: PeriodicPotential, b_star: int, k_star: float, M: int | None = None,
                       h_k: float = 1e-3, n_x: int = 512, rtol: float = 1e-5,
                       max_halvings: int = 12, dk_tol: float | None = None) -> BandEdge:
    """Band-edge data at (b_star, k_star) with an adaptively refined second derivative.

    The central-difference step starts at ``h_k`` and is halved until two
    successive Richardson estimates agree to ``rtol``.
    """
    if not (abs(k_star) < 1e-15 or abs(k_star - 0.5) < 1e-15):
        raise ValueError("k_star must be 0 or 1/2")
    k_star = 0.0 if abs(k_star) < 1e-15 else 0.5
    M = default_cutoff(Q) if M is None else M
    nb = b_star + 2

    def Eb(k):
        return float(bloch_energies(Q, k, M, nb)[b_star])

    pairs = solve_bloch(Q, k_star, M, nb)
    E0 = pairs[b_star].E
    margin_up = pairs[b_star + 1].E - E0
    margin_dn = E0 - pairs[b_star - 1].E if b_star > 0 else np.inf
    margin = float(min(margin_up, margin_dn))
    diag = {"E_star": E0, "simplicity_margin": margin}
    if margin <= gap_tolerance(E0):
        raise BandEdgeError(f"edge eigenvalue at b={b_star}, k={k_star} is not simple", diag)

    kind = expected_edge_kind(b_star, k_star)
    # neighbouring gap from a coarse scan of the adjacent band
    kk = default_k_grid(64)
    if kind == "lower":
        if b_star == 0:
            gap = (-np.inf, E0)
        else:
            other = max(float(bloch_energies(Q, k, M, b_star)[b_star - 1]) for k in kk)
            gap = (other, E0)
    else:
        other = min(float(bloch_energies(Q, k, M, b_star + 2)[b_star + 1]) for k in kk)
        gap = (E0, other)
    diag["gap"] = gap
    if not gap[1] - gap[0] > gap_tolerance(E0):
        raise BandEdgeError(f"gap adjacent to band {b_star} at k={k_star} is closed", diag)

    h = h_k
    prev = _richardson_d2(Eb, k_star, h, E0)
    cur = prev
    for _ in range(max_halvings):
        h /= 2
        cur = _richardson_d2(Eb, k_star, h, E0)
        if abs(cur - prev) <= rtol * abs(cur):
            break
        prev = cur
    else:
        diag["d2E_last"] = (prev, cur)
        raise BandEdgeError("second derivative did not converge under step halving", diag)
    d2E, d2E_half = cur, prev

    dE = (Eb(k_star + h) - Eb(k_star - h)) / (2 * h)
    d3E = (Eb(k_star + 2 * h) - 2 * Eb(k_star + h) + 2 * Eb(k_star - h)
           - Eb(k_star - 2 * h)) / (2 * h ** 3)
    diag.update(dE=dE, d2E=d2E, d3E=d3E)
    tol = dk_tol if dk_tol is not None else 1e-6 * (1 + abs(E0))
    if abs(dE) > tol:
        raise BandEdgeError("first k-derivative does not vanish at the edge", diag)
    if (kind == "lower" and d2E <= 0) or (kind == "upper" and d2E >= 0):
        raise BandEdgeError("curvature sign contradicts the edge type", diag)

    x = np.arange(n_x) / n_x
    u = real_gauge(pairs[b_star].u(x))
    return BandEdge(b_star, k_star, E0, float(d2E), kind, u, x, pairs[b_star].p_coeffs,
                    float(dE), float(d3E), margin, gap, h, float(d2E_half), M)


def kp_second_derivative(Q: PeriodicPotential, b: int, k: float, M: int | None = None) -> float:
    """d^2E_b/dk^2 from second-order perturbation theory in k (independent oracle)."""
    M = default_cutoff(Q) if M is None else M
    H = assemble_bloch_matrix(Q, k, M)
    w, v = scipy.linalg.eigh(H)
    n = np.arange(-M, M + 1)
    dH = 8.0 * np.pi ** 2 * (n + k)  # diagonal of dH/dk
    coup = v.conj().T @ (dH * v[:, b])
    s = 0.0
    for m in range(w.size):
        if m != b:
            s += abs(coup[m]) ** 2 / (w[b] - w[m])
    return float(8.0 * np.pi ** 2 + 2.0 * s)


def weyl_check(bs: BandStructure) -> dict:
    """Smallest C1, C2 with pi^2 b^2 - C1 <= E_b(k) <= pi^2 (b+1)^2 + C2 on the scan."""
    if bs.n_bands < 6:
        raise ValueError("need at least 6 bands")
    b = np.arange(bs.n_bands)[None, :]
    lower = np.pi ** 2 * b ** 2 - bs.energies
    upper = bs.energies - np.pi ** 2 * (b + 1) ** 2
    raw1, raw2 = float(lower.max()), float(upper.max())
    C1, C2 = max(0.0, raw1), max(0.0, raw2)
    bound = 4.0 * (1.0 + bs.Q.sup_norm())
    ok = bool(np.isfinite(C1) and np.isfinite(C2) and C1 <= bound and C2 <= bound)
    return {"C1": C1, "C2": C2, "raw_C1": raw1, "raw_C2": raw2, "bound": bound, "passed": ok}


def bloch_bound_check(bs: BandStructure, n_x: int = 256) -> dict:
    """Fitted constants for sup|u_b| and sup|u_b'|/(1+b), and their stability in b-range."""
    x = np.arange(n_x) / n_x
    nb = bs.n_bands
    sup_u = np.zeros(nb)
    sup_du = np.zeros(nb)
    for ik in range(len(bs.k_grid)):
        for b in range(nb):
            pr = bs.eigenpair(ik, b)
            sup_u[b] = max(sup_u[b], float(np.abs(pr.u(x)).max()))
            sup_du[b] = max(sup_du[b], float(np.abs(pr.du(x)).max()))
    ratio = sup_du / (1.0 + np.arange(nb))
    half = max(1, nb // 2)
    C_u_half, C_u = float(sup_u[:half].max()), float(sup_u.max())
    C_d_half, C_d = float(ratio[:half].max()), float(ratio.max())
    change = max(abs(C_u - C_u_half) / C_u_half, abs(C_d - C_d_half) / C_d_half)
    return {"sup_u": sup_u, "sup_du_ratio": ratio, "C_u": C_u, "C_du": C_d,
            "relative_change": float(change), "passed": bool(np.isfinite(C_u) and change < 0.2)}
