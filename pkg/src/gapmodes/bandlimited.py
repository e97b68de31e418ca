"""Band-limited rank-one effective operator

    (L0 f)(xi) = (4 pi^2 A xi^2 + theta^2) f(xi) - B chi(xi) int chi(eta) f(eta) d eta,

chi the indicator of |xi| < c with c = eps^-beta. Its kernel is nontrivial
exactly when theta solves

    1 - (B / (pi sqrt(A) theta)) arctan(2 pi sqrt(A) c / theta) = 0,

and is then spanned by chi(xi) / (4 pi^2 A xi^2 + theta^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EffectiveOperatorParams:
    A: float
    B: float
    beta: float
    epsilon: float

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0 and self.beta > 0):
            raise ValueError("A, B and beta must be positive")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")

    @property
    def cutoff(self) -> float:
        return self.epsilon ** (-self.beta)

    @property
    def theta_limit(self) -> float:
        """Root without cutoff: B / (2 sqrt A)."""
        return self.B / (2.0 * math.sqrt(self.A))


def theta_condition(theta: float, p: EffectiveOperatorParams, cutoff: float | None = None) -> float:
    if not theta > 0:
        raise ValueError("theta must be positive")
    c = p.cutoff if cutoff is None else cutoff
    sA = math.sqrt(p.A)
    at = math.pi / 2 if math.isinf(c) else math.atan(2 * math.pi * sA * c / theta)
    return 1.0 - p.B / (math.pi * sA * theta) * at


def _dcondition(theta, p, c):
    sA = math.sqrt(p.A)
    z = 2 * math.pi * sA * c / theta
    at = math.atan(z)
    # d/dtheta of -(B/(pi sA theta)) atan(z), dz/dtheta = -z/theta
    return p.B / (math.pi * sA * theta ** 2) * at + p.B / (math.pi * sA * theta) * (z / theta) / (1 + z * z)


class BoundViolation(AssertionError):
    pass


@dataclass(frozen=True)
class ThetaSolution:
    params: EffectiveOperatorParams
    theta0: float
    residual: float
    bound_lhs: float  # |1/theta0 - 2 sqrt(A)/B|
    bound_rhs: float  # eps^beta / (pi^2 sqrt(A))

    @property
    def theta0_squared(self) -> float:
        return self.theta0 ** 2

    @property
    def slack(self) -> float:
        return self.bound_rhs - self.bound_lhs

    def kernel(self, xi, closed: bool = False):
        """chi(xi) / (4 pi^2 A xi^2 + theta0^2); ``closed`` keeps the nodes at +-c."""
        p = self.params
        xi = np.asarray(xi, float)
        val = 1.0 / (4 * math.pi ** 2 * p.A * xi * xi + self.theta0 ** 2)
        a = np.abs(xi)
        inside = a <= p.cutoff * (1 + 1e-12) if closed else a < p.cutoff
        return np.where(inside, val, 0.0)


def theta0_solve(p: EffectiveOperatorParams) -> ThetaSolution:
    """Unique positive root by bisection on [B/(4 sqrt A), B/sqrt A], Newton polish."""
    c = p.cutoff
    sA = math.sqrt(p.A)
    lo, hi = p.B / (4 * sA), p.B / sA
    flo, fhi = theta_condition(lo, p), theta_condition(hi, p)
    if not (flo < 0 < fhi):
        raise BoundViolation("root is not bracketed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if theta_condition(mid, p) < 0:
            lo = mid
        else:
            hi = mid
    th = 0.5 * (lo + hi)
    for _ in range(3):
        th_new = th - theta_condition(th, p) / _dcondition(th, p, c)
        if not lo <= th_new <= hi or th_new == th:
            break
        th = th_new
    # best float among the neighbours
    cands = [th, np.nextafter(th, 0.0), np.nextafter(th, np.inf)]
    th = float(min(cands, key=lambda t: abs(theta_condition(t, p))))
    res = abs(theta_condition(th, p))
    lhs = abs(1.0 / th - 2.0 * sA / p.B)
    rhs = p.epsilon ** p.beta / (math.pi ** 2 * sA)
    if not lhs <= rhs:
        raise BoundViolation(f"|1/theta0 - 2 sqrt(A)/B| = {lhs:.3e} exceeds {rhs:.3e}")
    return ThetaSolution(p, th, res, lhs, rhs)


@dataclass(frozen=True)
class RealSpaceKernel:
    x: np.ndarray
    values: np.ndarray
    reference: np.ndarray  # (1/B) exp(-B |x| / (2A))

    @property
    def sup_distance(self) -> float:
        return float(np.max(np.abs(self.values - self.reference)))

    @property
    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.values - self.values[::-1])))


def kernel_realspace(sol: ThetaSolution, x_max: float | None = None, dxi_max: float = 1.0 / 400,
                     dx: float | None = None) -> RealSpaceKernel:
    """Inverse Fourier transform of the kernel by the trapezoid rule over [-c, c].

    The rule uses nodes on +-c with half weights; it is evaluated for all x at
    once with an FFT. By Poisson summation the result is the exact transform
    periodized with period 1/dxi, so the window is kept to |x| <= 1/(4 dxi).
    """
    p = sol.params
    c = p.cutoff
    J = int(math.ceil(c / dxi_max))
    dxi = c / J
    step = 1.0 / (8 * c) if dx is None else dx
    if step > 1.0 / (8 * c) * (1 + 1e-12):
        raise ValueError("x-grid does not resolve the cutoff oscillation")
    N = 1 << int(math.ceil(math.log2(max(1.0 / (step * dxi), 4 * J + 4))))
    xi = np.arange(-J, J + 1) * dxi
    w = np.ones(xi.size)
    w[0] = w[-1] = 0.5
    k = 1.0 / (4 * math.pi ** 2 * p.A * xi * xi + sol.theta0 ** 2)
    buf = np.zeros(N)
    idx = np.arange(-J, J + 1) % N
    buf[idx] = w * k * dxi
    vals = np.fft.ifft(buf).real * N  # sum_j c_j exp(2 pi i j m / N)
    vals = np.fft.fftshift(vals)
    xs = (np.arange(N) - N // 2) / (N * dxi)
    lim = 0.25 / dxi if x_max is None else min(x_max, 0.25 / dxi)
    sel = np.abs(xs) <= lim
    xs, vals = xs[sel], vals[sel]
    # enforce the exact mirror pairing of the grid
    if xs.size % 2 == 0:
        xs, vals = xs[1:], vals[1:]
    ref = np.exp(-p.B * np.abs(xs) / (2 * p.A)) / p.B
    return RealSpaceKernel(xs, vals, ref)


def apply_L0(theta: float, xi: np.ndarray, f_hat: np.ndarray, p: EffectiveOperatorParams) -> np.ndarray:
    """L0 on samples over a uniform xi-grid containing +-c as nodes.

    The projection integral uses the trapezoid rule on [-c, c] with half weight at +-c.
    """
    xi = np.asarray(xi, float)
    f_hat = np.asarray(f_hat)
    c = p.cutoff
    d = xi[1] - xi[0]
    if xi[0] > -c + 1e-12 * c or xi[-1] < c - 1e-12 * c:
        raise ValueError("xi-grid does not cover the cutoff")
    inside = np.abs(xi) <= c * (1 + 1e-12)
    wts = np.where(inside, d, 0.0)
    edge = np.isclose(np.abs(xi), c, rtol=1e-12, atol=0.0)
    wts[edge] *= 0.5
    proj = np.sum(wts * f_hat)
    chi = inside.astype(float)
    return (4 * math.pi ** 2 * p.A * xi * xi + theta ** 2) * f_hat - p.B * chi * proj


def xi_grid(p: EffectiveOperatorParams, dxi_max: float = 1.0 / 400, pad: int = 10) -> np.ndarray:
    J = int(math.ceil(p.cutoff / dxi_max))
    d = p.cutoff / J
    return np.arange(-J - pad, J + pad + 1) * d


def theta_bound_grid(values=(0.5, 1.0, 2.0), eps_grid=(0.2, 0.1, 0.05)):
    """theta0, residual, bound slack and kernel sup-distance over the parameter grid."""
    rows = []
    for A in values:
        for B in values:
            for beta in values:
                dists = []
                for eps in eps_grid:
                    sol = theta0_solve(EffectiveOperatorParams(A, B, beta, eps))
                    ker = kernel_realspace(sol)
                    dists.append(ker.sup_distance)
                    rows.append({"A": A, "B": B, "beta": beta, "epsilon": eps, "theta0": sol.theta0,
                                 "residual": sol.residual, "slack": sol.slack,
                                 "sup_distance": ker.sup_distance})
                slope = float(np.polyfit(np.log(eps_grid), np.log(dists), 1)[0])
                for r in rows[-len(eps_grid):]:
                    r["slope"] = slope
    return rows
