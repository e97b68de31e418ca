"""Invariant suites behind ``gapmodes verify``.

Each check returns a row {group, check, value, threshold, passed}; ``value``
is the measured quantity and ``threshold`` the bound it is held to.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from . import bandlimited, bloch, direct, effective, gelfand
from .potentials import PeriodicPotential


def _row(group, check, value, threshold, passed):
    return {"group": group, "check": check, "value": float(value), "threshold": float(threshold),
            "passed": bool(passed)}


def _le(group, check, value, threshold):
    return _row(group, check, value, threshold, value <= threshold)


# ---------------------------------------------------------------- bloch

MATHIEU_EDGES = ((0, 0.0), (0, 0.5), (1, 0.5), (1, 0.0))


def bloch_checks(Q: PeriodicPotential, n_bands: int = 8, M: int | None = None):
    g = "bloch"
    M = bloch.default_cutoff(Q) if M is None else M
    rows = []
    herm = 0.0
    for k in (0.0, 0.137, 0.5, -0.31):
        H = bloch.assemble_bloch_matrix(Q, k, M)
        herm = max(herm, float(np.max(np.abs(H - H.conj().T))))
    rows.append(_row(g, "hermitian_exact", herm, 0.0, herm == 0.0))
    bs = bloch.band_scan(Q, bloch.default_k_grid(64), n_bands, M)
    rows.append(_le(g, "orthonormality", bs.orthonormality_error, 1e-10))
    rows.append(_le(g, "time_reversal_symmetry", bs.symmetry_error, 1e-10))
    E1 = bs.energies
    E2 = np.array([bloch.bloch_energies(Q, k, 2 * M, n_bands) for k in bs.k_grid])
    rows.append(_le(g, "cutoff_doubling", float(np.max(np.abs(E1 - E2))), 1e-9))
    sorted_ok = bool(np.all(np.diff(E1, axis=1) >= 0))
    rows.append(_row(g, "sorted_bands", float(sorted_ok), 1.0, sorted_ok))
    w = bloch.weyl_check(bs)
    rows.append(_row(g, "weyl_C1", w["C1"], w["bound"], w["passed"]))
    rows.append(_row(g, "weyl_C2", w["C2"], w["bound"], w["passed"]))
    bb = bloch.bloch_bound_check(bs)
    rows.append(_le(g, "bloch_bound_relative_change", bb["relative_change"], 0.2))
    return rows


def edge_sign_checks(Q: PeriodicPotential | None = None):
    """Curvature signs at the first four edges: lower edges convex, upper edges concave."""
    Q = PeriodicPotential.mathieu() if Q is None else Q
    rows = []
    for b, k in MATHIEU_EDGES:
        e = bloch.band_edge_analysis(Q, b, k)
        sign = 1.0 if e.edge_kind == "lower" else -1.0
        rows.append(_row("bloch", f"edge_sign_b{b}_k{k}", sign * e.d2E, 0.0, sign * e.d2E > 0))
    return rows


# ---------------------------------------------------------------- gelfand

def gelfand_corpus():
    """Ten smooth functions decaying well inside [-40, 40]."""
    return [
        ("gauss_pi", lambda x: np.exp(-np.pi * x ** 2)),
        ("gauss", lambda x: np.exp(-x ** 2)),
        ("modulated", lambda x: np.exp(2j * np.pi * 10 * x) * np.exp(-x ** 2)),
        ("odd_gauss", lambda x: x * np.exp(-x ** 2 / 2)),
        ("shifted_wide", lambda x: np.exp(-(x - 1) ** 2 / 3)),
        ("sech2", lambda x: 1.0 / np.cosh(x) ** 2),
        ("gauss_cos", lambda x: np.exp(-x ** 2) * np.cos(3 * x)),
        ("quartic", lambda x: np.exp(-x ** 4 / 10)),
        ("x2_gauss", lambda x: x ** 2 * np.exp(-x ** 2 / 4)),
        ("wide_sine", lambda x: np.exp(-x ** 2 / 8) * np.sin(0.6 * np.pi * x)),
    ]


def gelfand_checks(K: int = 256, X: int = 40, dx: float = 1.0 / 64, M: int = 31, n_bands: int = 62):
    g = "gelfand"
    k = gelfand.bloch_k_grid(K)
    corpus = [(name, gelfand.sample(f, X, dx)) for name, f in gelfand_corpus()]
    Q = PeriodicPotential.mathieu()
    bs = bloch.band_scan(Q, k, n_bands, M)
    rt = pois = pars = comp = 0.0
    ratios = {0: [], 1: [], 2: []}
    transforms = {}
    for name, f in corpus:
        F = gelfand.gelfand_transform(f, k)
        transforms[name] = F
        scale = float(np.max(np.abs(f.values)))
        back = gelfand.inverse_transform(F)
        rt = max(rt, float(np.max(np.abs(back.values - f.values))) / scale)
        pois = max(pois, float(np.max(np.abs(F.values() - gelfand.poisson_values(f, k)))))
        l2 = gelfand.l2_norm_sq(f)
        tot, _, _ = gelfand.xs_norm(F, bs, 0)
        pars = max(pars, abs(tot - l2) / l2)
        comp = max(comp, gelfand.completeness_residual(F, bs))
        for s in ratios:
            ratios[s].append(gelfand.xs_norm(F, bs, s)[0] / gelfand.hs_norm_sq(f, s))
    rows = [_le(g, "round_trip", rt, 1e-8), _le(g, "poisson_identity", pois, 1e-9),
            _le(g, "parseval", pars, 1e-8), _le(g, "completeness", comp, 1e-6)]

    fa, fb = corpus[1][1], corpus[4][1]
    prod = gelfand.SampledFunction(fa.x, fa.values * fb.values)
    conv = gelfand.bloch_convolution(transforms["gauss"], transforms["shifted_wide"])
    err = float(np.max(np.abs(conv.values() - gelfand.gelfand_transform(prod, k).values())))
    rows.append(_le(g, "bloch_convolution", err, 1e-8))

    def V(x):
        return 2 * np.cos(2 * np.pi * x) + 0.3 * np.sin(4 * np.pi * x)

    Vf = gelfand.SampledFunction(fa.x, V(fa.x) * fa.values)
    err = float(np.max(np.abs(gelfand.gelfand_transform(Vf, k).values()
                              - gelfand.multiply_periodic(transforms["gauss"], V).values())))
    rows.append(_le(g, "multiplication_rule", err, 1e-9))

    fd = gelfand.sample(lambda x: -2 * x * np.exp(-x ** 2), X, dx)
    err = float(np.max(np.abs(gelfand.gelfand_transform(fd, k).values()
                              - gelfand.derivative(transforms["gauss"]).values())))
    rows.append(_le(g, "derivative_rule", err, 1e-9))

    for s, r in ratios.items():
        r = np.array(r)
        rows.append(_le(g, f"xs_hs_bracket_s{s}", float(r.max() / r.min()), 50.0))
    return rows


# ---------------------------------------------------------------- direct

def sturm_checks(n_instances: int = 100, max_size: int = 200, n_shifts: int = 20, seed: int = 12345):
    """Sturm counts against dense eigenvalues on random symmetric tridiagonals."""
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(n_instances):
        n = int(rng.integers(2, max_size + 1))
        d = rng.standard_normal(n) * 3
        e = rng.standard_normal(n - 1)
        ev = eigvalsh_tridiagonal(d, e)
        H = direct.TruncatedHamiltonian(np.arange(n, dtype=float), d, e, np.ones(n), 1.0, 1.0)
        lo, hi = H.gershgorin()
        shifts = np.concatenate([rng.uniform(lo - 1, hi + 1, n_shifts),
                                 0.5 * (ev[:-1] + ev[1:])[:5]])
        for E in shifts:
            exact = int(np.sum(ev < E))
            if direct.count_below(H, float(E)) != exact:
                mismatches += 1
    return [_row("direct", "sturm_vs_dense", mismatches, 0, mismatches == 0)]


def interior_gap_modes(Q: PeriodicPotential, gaps, L: int = 30, h: float = 1.0 / 64):
    """Boundary-filtered eigenvalues inside the given gaps for q = 0 on [-L, L].

    ``gaps`` lists (k, b) for the edge pair (b at k, b+1 at k) around each gap.
    """
    H = direct.assemble(Q, None, L, h)
    found = []
    for k, b in gaps:
        lo = direct.discrete_band_edge(Q, h, k, b)
        hi = direct.discrete_band_edge(Q, h, k, b + 1)
        d = 1e-4 * (hi - lo)
        cands = [(E, direct.inverse_iteration(H, E)[0]) for E in direct.eigenvalues_in(H, lo + d, hi - d)]
        found += [E for E, _ in direct.boundary_artifact_filter(H, cands)]
    return found


MATHIEU_GAPS = ((0.5, 0), (0.0, 1), (0.5, 2))


def no_spurious_mode_checks():
    worst = 0
    for c in (0.0, 0.1, 0.25, 0.4):
        Q = PeriodicPotential.from_fourier({1: cmath.exp(2j * math.pi * c)})
        worst = max(worst, len(interior_gap_modes(Q, MATHIEU_GAPS)))
    return [_row("direct", "no_gap_modes_without_perturbation", worst, 0, worst == 0)]


# ---------------------------------------------------------------- effective

def effective_checks():
    g = "effective"
    rows = []
    B, _ = effective.b_eff_two_scale(effective.cosine_spec(0.1))
    exact = math.sqrt(math.pi / 2) / (8 * math.pi ** 2)
    rows.append(_le(g, "b_eff_free_closed_form", abs(B - exact) / exact, 1e-10))
    for name, spec in (("cosine", effective.cosine_spec(0.1)), ("two_pair", effective.two_pair_spec(0.1))):
        rep = effective.two_scale_remainder(None, spec)
        rows.append(_row(g, f"remainder_slope_{name}", rep["slope"], 2.7, rep["slope"] >= 2.7))
    m = effective.EffectiveModel(1.0, 1.0)
    rows.append(_le(g, "unit_model", abs(m.E2 + 0.25) + abs(m.alpha0 + 0.5), 0.0))
    return rows


# ---------------------------------------------------------------- band-limited

def bandlimited_checks():
    g = "bandlimited"
    rows = bandlimited.theta_bound_grid()
    res = max(r["residual"] for r in rows)
    slack = min(r["slack"] for r in rows)
    slope_ratio = min(r["slope"] / r["beta"] for r in rows)
    return [_le(g, "theta_root_residual", res, 1e-12),
            _row(g, "theta_bound_min_slack", slack, 0.0, slack > 0),
            _row(g, "kernel_slope_over_beta", slope_ratio, 0.8, slope_ratio >= 0.8)]


def run_all(cfg=None):
    Q = PeriodicPotential.mathieu() if cfg is None else cfg.potential
    n_bands = 8 if cfg is None else max(6, int(cfg.solver["n_bands"]))
    rows = bloch_checks(Q, n_bands)
    rows += edge_sign_checks()
    rows += gelfand_checks()
    rows += sturm_checks()
    rows += no_spurious_mode_checks()
    rows += effective_checks()
    rows += bandlimited_checks()
    return rows
