"""Defect eigenvalues of -d^2/dx^2 + Q + q near a band edge by transfer-matrix matching.

Outside [-X0, X0] the perturbation is negligible and solutions are Floquet
solutions of the periodic background. A defect mode starts on the left as the
solution decaying towards -infinity, is propagated across [-X0, X0], and must
arrive on the right as the solution decaying towards +infinity.

Near the edge the monodromy M(E) is close to sigma (I + N) with N nilpotent, and
the defect shift E - E_* can be far below the resolution of E itself (for the
Mathieu acceptance case it is ~20 ulps of E_*). All quantities are therefore
expanded to first order in delta = E - E_ref around a discrete edge E_ref, with
delta carried as a separate float, and written in Jordan coordinates of N.
Further from the edge the exact transfer matrices at E_ref + delta are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .bloch import real_gauge
from .potentials import PeriodicPotential

GAUSS = (0.5 - math.sqrt(3.0) / 6.0, 0.5 + math.sqrt(3.0) / 6.0)


class NoDefectModeError(RuntimeError):
    pass


class MatchingError(RuntimeError):
    pass


@dataclass
class EdgeJordan:
    """Discrete band edge and the Jordan frame of the monodromy there."""

    E_ref: float
    delta0: float  # exact discrete edge is E_ref + delta0
    sigma: int
    M_ref: np.ndarray
    dM: np.ndarray
    P: np.ndarray
    Pinv: np.ndarray
    K: np.ndarray
    side: int  # -1: gap below the edge, +1: gap above


def _nodes(h, n_steps, x0=0.0):
    j = np.arange(n_steps)
    return x0 + (j + GAUSS[0]) * h, x0 + (j + GAUSS[1]) * h


def _free_edge_nodes(Q: PeriodicPotential, n_per: int):
    h = 1.0 / n_per
    a, b = _nodes(h, n_per)
    return Q(a), Q(b), h


def discrete_edge(Q: PeriodicPotential, E_guess: float, k_star: float, side: int,
                  n_per: int, max_iter: int = 60) -> EdgeJordan:
    """Newton on tr M(E) = 2 sigma, then the Jordan frame of sigma M at the edge."""
    sigma = 1 if abs(k_star) < 0.25 else -1
    v1, v2, h = _free_edge_nodes(Q, n_per)
    E = float(E_guess)
    for _ in range(max_iter):
        Mm, dM = kernels.magnus_transfer(v1, v2, h, E)
        g = np.trace(Mm) - 2 * sigma
        dg = np.trace(dM)
        step = g / dg
        E_new = E - step
        if E_new == E or abs(step) <= 2 * np.spacing(E):
            E = E_new
            break
        E = E_new
    Mm, dM = kernels.magnus_transfer(v1, v2, h, E)
    delta0 = -(np.trace(Mm) - 2 * sigma) / np.trace(dM)
    Mstar = Mm + delta0 * dM
    N = sigma * Mstar - np.eye(2)
    j = int(np.argmax(np.linalg.norm(N, axis=0)))
    w0 = N[:, j].copy()
    if np.linalg.norm(w0) < 1e-12:
        raise MatchingError("monodromy is diagonal at the edge (closed gap)")
    w1 = np.zeros(2)
    w1[j] = 1.0
    P = np.column_stack([w0, w1])
    Pinv = np.linalg.inv(P)
    K = sigma * (Pinv @ dM @ P)
    return EdgeJordan(E, float(delta0), sigma, Mm, dM, P, Pinv, K, side)


def _eigvec_t(a11m1, a12, a21, a22m1, s):
    """Multiplier mu and eigenvector (1, t) of A = I + [[a11m1, a12], [a21, a22m1]] (det A = 1).

    s = +1 picks the larger multiplier.
    """
    d = 0.5 * (a11m1 - a22m1)
    disc = d * d + a12 * a21
    if disc < 0:
        raise MatchingError("energy is inside a band")
    r = math.sqrt(disc)
    mu = 1.0 + 0.5 * (a11m1 + a22m1) + s * r
    if (d >= 0) == (s > 0):
        t = a21 / (d + s * r)
    else:
        t = (-d + s * r) / a12
    return mu, t


@dataclass
class FloquetProblem:
    """Matching problem for one perturbation on [-X0, X0] at a given band edge."""

    Q: PeriodicPotential
    q: object  # callable x -> real perturbation
    X0: int
    n_per: int
    jordan: EdgeJordan
    T_ref: np.ndarray = field(repr=False, default=None)
    dT: np.ndarray = field(repr=False, default=None)
    lin_threshold: float = 0.0

    @property
    def h(self) -> float:
        return 1.0 / self.n_per

    def potential_nodes(self):
        n_per, X0 = self.n_per, self.X0
        a, b = _nodes(1.0 / n_per, n_per)
        qa, qb = self.Q(a), self.Q(b)
        reps = 2 * X0
        x1, x2 = _nodes(1.0 / n_per, reps * n_per, -float(X0))
        v1 = np.tile(qa, reps) + self.q(x1)
        v2 = np.tile(qb, reps) + self.q(x2)
        return v1, v2

    def setup(self):
        v1, v2 = self.potential_nodes()
        self._v = (v1, v2)
        self.T_ref, self.dT = kernels.magnus_transfer(v1, v2, self.h, self.jordan.E_ref)
        self.lin_threshold = 1e-9 * (1.0 + abs(self.jordan.E_ref))
        return self

    # frames ---------------------------------------------------------------
    def _frame(self, delta):
        """(A - I entries in Jordan coordinates, transfer in Jordan coordinates) at E_ref + delta."""
        J = self.jordan
        if abs(delta) <= self.lin_threshold:
            dp = delta - J.delta0
            K = J.K
            A = (dp * K[0, 0], 1.0 + dp * K[0, 1], dp * K[1, 0], dp * K[1, 1])
            T = J.Pinv @ (self.T_ref + delta * self.dT) @ J.P
        else:
            E = J.E_ref + delta
            v1, v2, h = _free_edge_nodes(self.Q, self.n_per)
            Mm, _ = kernels.magnus_transfer(v1, v2, h, E)
            At = J.sigma * (J.Pinv @ Mm @ J.P)
            A = (At[0, 0] - 1.0, At[0, 1], At[1, 0], At[1, 1] - 1.0)
            Tf, _ = kernels.magnus_transfer(*self._v, self.h, E)
            T = J.Pinv @ Tf @ J.P
        return A, T

    def mismatch(self, delta):
        """det[T v_L, v_R] in Jordan coordinates; zero at a defect eigenvalue."""
        A, T = self._frame(delta)
        _, tL = _eigvec_t(*A, +1)
        _, tR = _eigvec_t(*A, -1)
        a = T[0, 0] + T[0, 1] * tL
        b = T[1, 0] + T[1, 1] * tL
        return a * tR - b

    def multipliers(self, delta):
        A, _ = self._frame(delta)
        muL, tL = _eigvec_t(*A, +1)
        muR, tR = _eigvec_t(*A, -1)
        return muL, tL, muR, tR


@dataclass
class FloquetMode:
    E_eps: float  # E_ref + delta rounded to double
    shift: float  # E - E_*, accurate far below the resolution of E
    delta: float  # E - E_ref
    problem: FloquetProblem = field(repr=False)
    mu_left: float = 0.0
    mu_right: float = 0.0
    residual: float = 0.0
    n_roots: int = 1

    @property
    def localization_length(self) -> float:
        """1/kappa with |psi| ~ exp(-kappa |x|) in the exterior."""
        kr = -math.log(abs(self.mu_right))
        kl = math.log(abs(self.mu_left))
        return 2.0 / (kr + kl)

    def states(self):
        """Orbit (x, psi, psi') across [-X0, X0] and the exterior one-period solutions."""
        pr = self.problem
        J = pr.jordan
        muL, tL, muR, tR = pr.multipliers(self.delta)
        vL = J.P @ np.array([1.0, tL])
        vR = J.P @ np.array([1.0, tR])
        E = J.E_ref + self.delta
        v1, v2 = pr._v
        orb = kernels.magnus_orbit(v1, v2, pr.h, E, vL[0], vL[1])
        x = -pr.X0 + np.arange(orb.shape[0]) * pr.h
        # one-period exterior solutions (start of the period at -X0 and at X0)
        a1, a2, h = _free_edge_nodes(pr.Q, pr.n_per)
        left = kernels.magnus_orbit(a1, a2, h, E, vL[0], vL[1])
        yR = orb[-1]
        # the arriving state is parallel to v_R; use it directly
        right = kernels.magnus_orbit(a1, a2, h, E, yR[0], yR[1])
        return x, orb, left, right, J.sigma * muL, J.sigma * muR

    def psi(self, x, normalize_at=None):
        """psi at arbitrary points (exterior via Floquet multipliers)."""
        pr = self.problem
        xg, orb, left, right, mL, mR = self.states()
        x = np.asarray(x, float)
        out = np.empty(x.shape)
        inner = np.abs(x) <= pr.X0
        out[inner] = np.interp(x[inner], xg, orb[:, 0])
        yg = np.arange(pr.n_per + 1) * pr.h
        xr = x[x > pr.X0] - pr.X0
        m = np.floor(xr)
        out[x > pr.X0] = np.sign(mR) ** m * np.exp(m * math.log(abs(mR))) * np.interp(xr - m, yg, right[:, 0])
        xl = x[x < -pr.X0] + pr.X0  # negative
        m = np.floor(xl)  # negative integers
        out[x < -pr.X0] = np.sign(mL) ** m * np.exp(m * math.log(abs(mL))) * np.interp(xl - m, yg, left[:, 0])
        return out


def support_half_width(q, tol: float = 1e-15, start: float = 1.0) -> int:
    """Smallest integer X0 with |q| < tol on [X0, 4 X0] and [-4 X0, -X0] (sampled)."""
    X0 = max(1, int(math.ceil(start)))
    while X0 < 10000:
        y = np.linspace(X0, 4 * X0, 20001)
        if np.max(np.abs(q(y))) < tol and np.max(np.abs(q(-y))) < tol:
            return X0
        X0 += 1
    raise MatchingError("perturbation does not decay")


def solve_defect(Q: PeriodicPotential, q, E_star: float, k_star: float, *, side: int = -1,
                 gap_width: float | None = None, X0: int | None = None, n_per: int = 2000,
                 n_scan: int = 400, xtol: float = 0.0) -> FloquetMode:
    """Defect eigenvalue nearest to the edge on the gap side ``side``.

    ``E_star`` seeds the discrete edge; ``gap_width`` bounds the search (default: to 1.0).
    """
    if X0 is None:
        X0 = support_half_width(q)
    J = discrete_edge(Q, E_star, k_star, side, n_per)
    pr = FloquetProblem(Q, q, int(X0), n_per, J).setup()
    width = 1.0 if gap_width is None else gap_width
    s_max = math.sqrt(0.98 * width)
    s_min = 1e-13 * math.sqrt(1.0 + abs(J.E_ref))

    def F(s):
        return pr.mismatch(J.delta0 + side * s * s)

    ss = np.geomspace(s_min, s_max, n_scan)
    Fs = np.array([F(s) for s in ss])
    sign_change = np.flatnonzero(np.sign(Fs[:-1]) * np.sign(Fs[1:]) < 0)
    if sign_change.size == 0:
        raise NoDefectModeError("no sign change of the matching function inside the gap")
    i = int(sign_change[0])
    s_root = brentq(F, ss[i], ss[i + 1], xtol=xtol or 1e-300, rtol=4 * np.finfo(float).eps,
                    maxiter=400)
    shift = side * s_root * s_root
    delta = J.delta0 + shift
    muL, _, muR, _ = pr.multipliers(delta)
    scale = max(abs(F(ss[i])), abs(F(ss[i + 1])))
    return FloquetMode(J.E_ref + delta, shift, delta, pr, J.sigma * muL, J.sigma * muR,
                       abs(F(s_root)) / scale, int(sign_change.size))


def profile_error(mode: FloquetMode, u_star, g0, eps: float, m_max: float | None = None,
                  n_m: int = 200):
    """sup |psi - u_* g0(eps^2 x)| with psi scaled to match at the peak of |u_* g0|.

    ``u_star`` is a callable x -> u_*(x) (real gauge), ``g0`` a callable y -> g0(y).
    Returns (error, x_norm).
    """
    pr = mode.problem
    xg, orb, left, right, mL, mR = mode.states()

    def pred(x):
        return np.real(u_star(x)) * g0(eps * eps * x)

    cand = np.linspace(-0.5, 0.5, 2001)
    x_n = float(cand[np.argmax(np.abs(pred(cand)))])
    psi_n = mode.psi(np.array([x_n]))[0]
    c = pred(np.array([x_n]))[0] / psi_n

    err = float(np.max(np.abs(c * orb[:, 0] - pred(xg))))
    yg = np.arange(pr.n_per + 1) * pr.h
    if m_max is None:
        m_max = 40.0 * mode.localization_length
    ms = np.unique(np.concatenate([np.arange(0, 64),
                                   np.round(np.geomspace(64, max(m_max, 65), n_m))]))
    for m in ms:
        for sgn, sol, mu in ((1, right, mR), (-1, left, mL)):
            if sgn > 0:
                x = pr.X0 + m + yg
                amp = np.sign(mu) ** m * abs(mu) ** m
            else:
                x = -pr.X0 - m + yg
                amp = np.sign(mu) ** (-m) * abs(mu) ** (-m)
            err = max(err, float(np.max(np.abs(c * amp * sol[:, 0] - pred(x)))))
    return err, x_n


def u_star_callable(edge):
    """Real-gauge Bloch wave u_*(x) at any x from a BandEdge."""
    pair = edge.eigenpair()
    x0 = np.arange(256) / 256
    u0 = pair.u(x0)
    ph = (real_gauge(u0)[0] / u0[0]) if abs(u0[0]) > 0 else 1.0

    def u(x):
        x = np.asarray(x, float)
        flat = x.ravel()
        out = np.empty(flat.shape)
        for s in range(0, flat.size, 8192):
            xs = flat[s:s + 8192]
            # reduce to one period, then restore the Bloch phase
            n = np.floor(xs)
            val = pair.u(xs - n) * ph
            out[s:s + 8192] = np.real(val * np.exp(2j * np.pi * pair.k * n))
        return out.reshape(x.shape)

    return u
