"""Effective coupling of a localized high-frequency perturbation and the
resulting one-dimensional Dirac-well model.

A two-scale perturbation is q_eps(x) = sum_j q_j(x) exp(2 pi i lambda_j x / eps)
with slowly varying envelopes q_j. Its effective coupling at a band edge with
Bloch wave u_* is

    B_eff = int |u_*(x)|^2 sum_j |q_j(x)|^2 / (2 pi lambda_j)^2 dx,

and with A_eff = d2E / (8 pi^2) the bound state of -A d^2 - B delta gives
E2 = -B^2 / (4A), alpha0 = -B / (2A), g0(y) = exp(-(B / 2A) |y|).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .potentials import ConfigError
from .sampled import SampledFunction, uniform_grid

TWO_PI = 2.0 * np.pi

# closed form of the profile, also used by the symbolic jump-condition test
G0_FORMULA = "exp(-(B/(2*A))*Abs(y))"


class UpperEdgeError(ValueError):
    """Bifurcation is only predicted from edges with positive curvature."""


class NoBifurcationError(ValueError):
    """Zero effective coupling: no defect mode is predicted."""


@dataclass(frozen=True)
class Envelope:
    """Slowly varying envelope q_j.

    kinds
    -----
    gaussian    amp * exp(-((x - center) / width)^2), amp may be complex
    gauss_poly  (sum_k coeffs[k] s^k) * exp(-s^2), s = (x - center) / width
    samples     linear interpolation of (xs, vals), zero outside
    """

    kind: str = "gaussian"
    amp: complex = 1.0
    width: float = 1.0
    center: float = 0.0
    coeffs: tuple = ()
    xs: tuple = ()
    vals: tuple = ()

    def __post_init__(self):
        if self.kind not in ("gaussian", "gauss_poly", "samples"):
            raise ConfigError(f"unknown envelope kind {self.kind!r}")
        if self.kind != "samples" and not self.width > 0:
            raise ConfigError("envelope width must be positive")
        if self.kind == "samples" and len(self.xs) != len(self.vals):
            raise ConfigError("samples envelope needs matching xs and vals")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            s = (x - self.center) / self.width
            return complex(self.amp) * np.exp(-s * s)
        if self.kind == "gauss_poly":
            s = (x - self.center) / self.width
            poly = np.polynomial.polynomial.polyval(s, np.asarray(self.coeffs, dtype=complex))
            return poly * np.exp(-s * s)
        xs = np.asarray(self.xs, float)
        v = np.asarray(self.vals, dtype=complex)
        re = np.interp(x, xs, v.real, left=0.0, right=0.0)
        im = np.interp(x, xs, v.imag, left=0.0, right=0.0)
        return re + 1j * im

    def conj(self) -> "Envelope":
        return replace(self, amp=np.conj(complex(self.amp)),
                       coeffs=tuple(np.conj(np.asarray(self.coeffs, dtype=complex))),
                       vals=tuple(np.conj(np.asarray(self.vals, dtype=complex))))

    def scaled(self, c: float) -> "Envelope":
        return replace(self, amp=complex(self.amp) * c,
                       coeffs=tuple(np.asarray(self.coeffs, dtype=complex) * c),
                       vals=tuple(np.asarray(self.vals, dtype=complex) * c))

    def radius(self, tol: float) -> float:
        """R with |q_j(x)| < tol for |x| > R."""
        if self.kind == "gaussian":
            a = abs(complex(self.amp))
            if a <= tol:
                return abs(self.center)
            return abs(self.center) + self.width * math.sqrt(math.log(a / tol))
        if self.kind == "samples":
            xs = np.asarray(self.xs, float)
            big = np.abs(np.asarray(self.vals, dtype=complex)) >= tol
            return float(np.max(np.abs(xs[big]))) if big.any() else 0.0
        x = self.center + self.width * np.linspace(-60.0, 60.0, 48001)
        big = np.abs(self(x)) >= tol
        return float(np.max(np.abs(x[big]))) if big.any() else abs(self.center)

    def to_json(self) -> dict:
        a = complex(self.amp)
        d = {"kind": self.kind}
        if self.kind == "gaussian":
            d.update(amp=[a.real, a.imag] if a.imag else a.real, width=self.width)
        elif self.kind == "gauss_poly":
            d.update(coeffs=[[complex(c).real, complex(c).imag] for c in self.coeffs],
                     width=self.width)
        else:
            d.update(xs=list(map(float, self.xs)),
                     vals=[[complex(v).real, complex(v).imag] for v in self.vals])
        if self.center:
            d["center"] = self.center
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Envelope":
        if not isinstance(d, dict):
            raise ConfigError("envelope must be an object")
        kind = d.get("kind", "gaussian")

        def cpx(v):
            if isinstance(v, (list, tuple)):
                if len(v) != 2:
                    raise ConfigError("complex values are [re, im]")
                return complex(float(v[0]), float(v[1]))
            return complex(float(v))

        try:
            if kind == "gaussian":
                return cls("gaussian", amp=cpx(d.get("amp", 1.0)), width=float(d.get("width", 1.0)),
                           center=float(d.get("center", 0.0)))
            if kind == "gauss_poly":
                return cls("gauss_poly", coeffs=tuple(cpx(c) for c in d["coeffs"]),
                           width=float(d.get("width", 1.0)), center=float(d.get("center", 0.0)))
            if kind == "samples":
                return cls("samples", xs=tuple(float(v) for v in d["xs"]),
                           vals=tuple(cpx(v) for v in d["vals"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad envelope: {exc}") from exc
        raise ConfigError(f"unknown envelope kind {kind!r}")


@dataclass(frozen=True)
class Term:
    lam: float
    env: Envelope


@dataclass(frozen=True)
class OscillatorySpec:
    """Perturbation q_eps.

    mode ``two-scale``: sum_j env_j(x) exp(2 pi i lam_j x / eps), paired so the sum is real.
    mode ``rescaled``: profile(x / eps**gamma) for a real, zero-mean profile.
    mode ``raw-samples``: q_eps given directly by samples (eps only labels the scale).
    """

    terms: tuple = ()
    epsilon: float = 0.1
    mode: str = "two-scale"
    gamma: float = 2.0 / 3.0
    profile: Envelope | None = None
    samples: SampledFunction | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.mode == "two-scale":
            self.check_pairing()
            if self.terms and self.theta() <= 0:
                raise ConfigError("frequencies cluster: need distinct nonzero lambdas")
        elif self.mode == "rescaled":
            if self.profile is None:
                raise ConfigError("rescaled mode needs a profile")
        elif self.mode == "raw-samples":
            if self.samples is None:
                raise ConfigError("raw-samples mode needs samples")
        else:
            raise ConfigError(f"unknown mode {self.mode!r}")

    def with_epsilon(self, eps: float) -> "OscillatorySpec":
        return replace(self, epsilon=float(eps))

    def scaled(self, c: float) -> "OscillatorySpec":
        return replace(self, terms=tuple(Term(t.lam, t.env.scaled(c)) for t in self.terms),
                       profile=None if self.profile is None else self.profile.scaled(c))

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([t.lam for t in self.terms], dtype=float)

    @property
    def max_lambda(self) -> float:
        return float(np.max(np.abs(self.lambdas))) if self.terms else 1.0

    def theta(self) -> float:
        """Nonclustering constant min(|lam_j - lam_l|, |lam_j|)."""
        lam = self.lambdas
        if lam.size == 0:
            return math.inf
        th = float(np.min(np.abs(lam)))
        for i in range(lam.size):
            for j in range(i + 1, lam.size):
                th = min(th, abs(lam[i] - lam[j]))
        return th

    def check_pairing(self, tol: float = 1e-12):
        x = np.linspace(-8.0, 8.0, 401)
        for t in self.terms:
            partners = [s for s in self.terms if abs(s.lam + t.lam) <= tol * (1 + abs(t.lam))]
            if len(partners) != 1:
                raise ConfigError(f"frequency {t.lam} has no unique partner at {-t.lam}")
            a, b = t.env(x), np.conj(partners[0].env(x))
            if np.max(np.abs(a - b)) > tol * (1 + np.max(np.abs(a))):
                raise ConfigError(f"envelope at {-t.lam} is not the conjugate of the one at {t.lam}")

    def radius(self, tol: float = 1e-14) -> float:
        eps = self.epsilon
        if self.mode == "two-scale":
            return max([t.env.radius(tol / max(1, len(self.terms))) for t in self.terms] or [0.0])
        if self.mode == "rescaled":
            return self.profile.radius(tol) * eps ** self.gamma
        s = self.samples
        big = np.abs(s.values) >= tol
        return float(np.max(np.abs(s.x[big]))) if big.any() else 0.0

    def q_complex(self, x):
        x = np.asarray(x, dtype=float)
        if self.mode == "two-scale":
            out = np.zeros(x.shape, dtype=complex)
            for t in self.terms:
                out += t.env(x) * np.exp(TWO_PI * 1j * (t.lam / self.epsilon) * x)
            return out
        if self.mode == "rescaled":
            return self.profile(x / self.epsilon ** self.gamma).astype(complex)
        s = self.samples
        return np.interp(x, s.x, np.real(s.values), left=0.0, right=0.0).astype(complex)

    def q_eps(self, x):
        """Real-valued perturbation at x."""
        return self.q_complex(x).real

    # JSON
    @classmethod
    def from_json(cls, doc) -> "OscillatorySpec":
        if isinstance(doc, str):
            try:
                doc = json.loads(doc)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("perturbation must be an object")
        try:
            eps = float(doc.get("epsilon", 0.1))
            mode = doc.get("mode", "two-scale")
            terms = tuple(Term(float(t["lambda"]), Envelope.from_json(t.get("envelope", {})))
                          for t in doc.get("terms", []))
            profile = Envelope.from_json(doc["profile"]) if "profile" in doc else None
            samples = None
            if "samples" in doc:
                xs = np.asarray(doc["samples"]["x"], float)
                samples = SampledFunction(xs, np.asarray(doc["samples"]["values"], float))
            return cls(terms, eps, mode, float(doc.get("gamma", 2.0 / 3.0)), profile, samples)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad perturbation spec: {exc}") from exc

    def to_json(self) -> dict:
        d = {"epsilon": self.epsilon, "mode": self.mode,
             "terms": [{"lambda": t.lam, "envelope": t.env.to_json()} for t in self.terms]}
        if self.mode == "rescaled":
            d.update(gamma=self.gamma, profile=self.profile.to_json())
        if self.mode == "raw-samples":
            d["samples"] = {"x": self.samples.x.tolist(), "values": np.real(self.samples.values).tolist()}
        return d


def cosine_spec(epsilon: float, amp: float = 1.0, width: float = 1.0) -> OscillatorySpec:
    """amp * cos(2 pi x / eps) * exp(-(x / width)^2)."""
    env = Envelope("gaussian", amp=amp / 2, width=width)
    return OscillatorySpec((Term(1.0, env), Term(-1.0, env)), epsilon)


def two_pair_spec(epsilon: float) -> OscillatorySpec:
    """cos(2 pi x / eps) e^{-x^2} + sin(2 pi sqrt2 x / eps) x e^{-x^2 / 2}, frequencies +-1, +-sqrt2."""
    e1 = Envelope("gaussian", amp=0.5)
    e2 = Envelope("gauss_poly", coeffs=(0.0, -0.5j * math.sqrt(2.0)), width=math.sqrt(2.0))
    r2 = math.sqrt(2.0)
    return OscillatorySpec((Term(1.0, e1), Term(-1.0, e1), Term(r2, e2), Term(-r2, e2.conj())),
                           epsilon)


def lambda_eff(spec: OscillatorySpec):
    """Lambda_eff(x) = sum_j |q_j(x)|^2 / (2 pi lambda_j)^2."""
    if spec.mode != "two-scale":
        raise ConfigError("lambda_eff needs a two-scale spec")
    terms = spec.terms

    def lam(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for t in terms:
            out += np.abs(t.env(x)) ** 2 / (TWO_PI * t.lam) ** 2
        return out

    return lam


def bloch_density(p_coeffs: np.ndarray):
    """x -> |p(x)|^2 for a Bloch periodic part given by Fourier coefficients (modes -M..M)."""
    c = np.asarray(p_coeffs, dtype=complex)
    M = c.size // 2
    # autocorrelation: d_n = sum_m c_{m+n} conj(c_m), n = -2M..2M
    d = np.correlate(c, c, mode="full")
    n = np.arange(-2 * M, 2 * M + 1)
    keep = np.abs(d) > 1e-17
    d, n = d[keep], n[keep]

    def dens(x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty(flat.shape)
        for s in range(0, flat.size, 8192):
            xs = flat[s:s + 8192]
            out[s:s + 8192] = (np.exp(TWO_PI * 1j * np.multiply.outer(xs, n)) @ d).real
        return out.reshape(x.shape)

    return dens


def edge_density(edge):
    """|u_*(x)|^2 for a BandEdge (or None for the free edge u = 1)."""
    if edge is None:
        return lambda x: np.ones(np.shape(x))
    return bloch_density(edge.p_coeffs)


def _trap(f, R, h):
    n = int(math.ceil(2 * R / h))
    x = np.linspace(-R, R, n + 1)
    return float(np.trapezoid(f(x), x))


def b_eff_two_scale(spec: OscillatorySpec, density=None, h: float = 1.0 / 256,
                    tol: float = 1e-12):
    """B_eff and a half-step quadrature error estimate.

    ``density`` is x -> |u_*(x)|^2 (default: u = 1).
    """
    lam = lambda_eff(spec)
    dens = density if density is not None else (lambda x: np.ones(np.shape(x)))
    R = math.ceil(spec.radius(math.sqrt(tol) * 1e-3)) + 1.0
    if np.max(lam(np.array([-R, R]))) > tol:
        raise ConfigError("envelopes do not decay at the quadrature boundary")

    def f(x):
        return dens(x) * lam(x)

    I1 = _trap(f, R, h)
    I2 = _trap(f, R, 2 * h)
    return I1, abs(I1 - I2)


def default_step(spec: OscillatorySpec) -> float:
    return min(1.0 / 64, spec.epsilon / (20.0 * spec.max_lambda))


def q_eps_materialize(spec: OscillatorySpec, X: float | None = None, h: float | None = None,
                      boundary_tol: float = 1e-12) -> SampledFunction:
    """Real samples of q_eps on [-X, X)."""
    if spec.mode == "raw-samples" and X is None and h is None:
        return spec.samples
    if X is None:
        X = float(math.ceil(spec.radius(1e-16)) + 1)
    if h is None:
        h = default_step(spec)
    n = int(math.ceil(2 * X / h))
    h = 2 * X / n
    if spec.mode == "two-scale" and h > spec.epsilon / (8.0 * spec.max_lambda):
        raise ConfigError("grid does not resolve the carrier (need 8 points per wavelength)")
    x = uniform_grid(X, h)
    qc = spec.q_complex(x)
    scale = max(1.0, float(np.max(np.abs(qc))))
    if np.max(np.abs(qc.imag)) > 1e-12 * scale:
        raise ConfigError("materialized perturbation is not real")
    if max(abs(qc[0]), abs(spec.q_complex(np.array([X]))[0])) > boundary_tol * scale:
        raise ConfigError("perturbation does not decay at the window boundary")
    return SampledFunction(x, qc.real.copy())


def filtered_potential(q: SampledFunction) -> SampledFunction:
    """Q_eps with Qhat(xi) = qhat(xi) / (1 + 4 pi^2 xi^2), via the periodic FFT."""
    xi = np.fft.fftfreq(q.n, d=q.h)
    Qv = np.fft.ifft(np.fft.fft(q.values) / (1.0 + (TWO_PI * xi) ** 2))
    if np.isrealobj(q.values):
        Qv = Qv.real
    return SampledFunction(q.x, Qv)


def b_eff_general(q: SampledFunction, density, eps: float) -> float:
    """B(eps) = eps^-2 int |u|^2 q_eps Q_eps dx."""
    Q = filtered_potential(q)
    dens = np.ones(q.n) if density is None else density(q.x)
    return float(np.real(np.sum(dens * q.values * np.conj(Q.values))) * q.h / eps ** 2)


def loglog_slope(x, y) -> float:
    x = np.asarray(x, float)
    y = np.abs(np.asarray(y, float))
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def b_eff_general_report(spec: OscillatorySpec, density=None, eps_grid=(0.2, 0.14, 0.1, 0.07, 0.05),
                         reference: float | None = None) -> dict:
    """B(eps) across a grid, the distance to a reference (two-scale B_eff) and fitted sigma_eff."""
    eps_grid = np.asarray(eps_grid, float)
    vals = np.array([b_eff_general(q_eps_materialize(spec.with_epsilon(e)), density, e)
                     for e in eps_grid])
    if reference is None and spec.mode == "two-scale":
        reference = b_eff_two_scale(spec, density)[0]
    out = {"epsilon": eps_grid, "B": vals, "reference": reference}
    if reference is not None:
        diff = np.abs(vals - reference)
        out["rel_diff"] = diff / abs(reference)
        out["sigma_eff"] = loglog_slope(eps_grid, diff) if np.all(diff > 0) else math.inf
    else:
        d = np.abs(np.diff(vals))
        out["sigma_eff"] = loglog_slope(eps_grid[1:], d) if np.all(d > 0) else math.inf
    out["converging"] = bool(np.isfinite(out["sigma_eff"]) and out["sigma_eff"] > 0)
    return out


def b_eff_rescaled(q, u0_sq: float = 1.0, R: float = 30.0, h: float = 1e-3) -> float:
    """|u_*(0)|^2 int |int_{-inf}^x q|^2 dx for a zero-mean profile q."""
    y = np.linspace(-R, R, int(round(2 * R / h)) + 1)
    qy = np.asarray(q(y))
    if np.iscomplexobj(qy):
        if np.max(np.abs(qy.imag)) > 1e-12 * max(1.0, float(np.max(np.abs(qy)))):
            raise ConfigError("rescaled profile must be real")
        qy = qy.real
    F = cumulative_trapezoid(qy, y, initial=0.0)
    mass = float(np.trapezoid(np.abs(qy), y))
    if abs(F[-1]) > 1e-8 * max(mass, 1e-300):
        raise ConfigError("profile has nonzero mean; its antiderivative does not decay")
    return float(u0_sq * np.trapezoid(F * F, y))


def hypothesis_report(q: SampledFunction, eps: float, low_freq_threshold: float | None = None) -> dict:
    """Numerical evidence for the low-frequency smallness of qhat_eps."""
    xi, qh = q.fourier()
    low = np.abs(xi) <= 1.0 / (2 * eps)
    sup_low = float(np.max(np.abs(qh[low])))
    l2 = float(np.sum(np.abs(q.values) ** 2) * q.h)
    rep = {"epsilon": eps, "sup_low_freq": sup_low, "l2_mass": l2, "sup": q.sup()}
    if low_freq_threshold is not None:
        rep["passed"] = sup_low <= low_freq_threshold
    return rep


@dataclass(frozen=True)
class EffectiveModel:
    A_eff: float
    B_eff: float
    E_star: float = 0.0
    d2E: float | None = None
    b_star: int = 0
    k_star: float = 0.0

    @property
    def E2(self) -> float:
        return -self.B_eff ** 2 / (4.0 * self.A_eff)

    @property
    def alpha0(self) -> float:
        return -self.B_eff / (2.0 * self.A_eff)

    @property
    def E2_from_d2E(self) -> float:
        d2E = self.d2E if self.d2E is not None else 8 * np.pi ** 2 * self.A_eff
        return -self.B_eff ** 2 / (d2E / (2 * np.pi ** 2))

    @property
    def alpha0_from_d2E(self) -> float:
        d2E = self.d2E if self.d2E is not None else 8 * np.pi ** 2 * self.A_eff
        return -self.B_eff / (d2E / (4 * np.pi ** 2))

    def g0(self, y):
        return np.exp(-(self.B_eff / (2.0 * self.A_eff)) * np.abs(np.asarray(y, float)))

    def predicted_shift(self, eps: float) -> float:
        return eps ** 4 * self.E2

    def predicted_E(self, eps: float) -> float:
        return self.E_star + eps ** 4 * self.E2

    def localization_length(self, eps: float) -> float:
        return 1.0 / (abs(self.alpha0) * eps ** 2)


def effective_model(edge, B_eff: float) -> EffectiveModel:
    """Dirac-well model at a lower band edge (``edge`` is a BandEdge, or None for Q = 0)."""
    if edge is None:
        d2E, E_star, b, k = 8 * np.pi ** 2, 0.0, 0, 0.0
    else:
        d2E, E_star, b, k = edge.d2E, edge.E_star, edge.b_star, edge.k_star
    if not d2E > 0:
        raise UpperEdgeError("edge has nonpositive curvature; no bifurcation into the gap below")
    if not B_eff > 0:
        raise NoBifurcationError("effective coupling vanishes")
    return EffectiveModel(d2E / (8 * np.pi ** 2), float(B_eff), E_star, d2E, b, k)


def two_scale_remainder(f, spec: OscillatorySpec, eps_grid=(0.2, 0.14, 0.1, 0.07, 0.05)) -> dict:
    """R(eps) = |int f q_eps Q_eps - eps^2 sum_m (4 pi^2 lam_m^2)^-1 int f |q_m|^2| and its slope."""
    eps_grid = np.asarray(eps_grid, float)
    R, lead = [], []
    for e in eps_grid:
        s = spec.with_epsilon(e)
        q = q_eps_materialize(s)
        Q = filtered_potential(q)
        fx = np.ones(q.n) if f is None else np.asarray(f(q.x), float)
        I = float(np.real(np.sum(fx * q.values * np.conj(Q.values))) * q.h)
        L = 0.0
        for t in s.terms:
            L += float(np.sum(fx * np.abs(t.env(q.x)) ** 2) * q.h) / (TWO_PI * t.lam) ** 2
        R.append(abs(I - e * e * L))
        lead.append(e * e * L)
    R = np.array(R)
    slope = loglog_slope(eps_grid, R) if np.all(R > 0) else math.inf
    return {"epsilon": eps_grid, "R": R, "leading": np.array(lead), "slope": slope}
