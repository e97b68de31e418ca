import math

import numpy as np
import pytest
from scipy.optimize import brentq

from gapmodes import direct
from gapmodes.potentials import ConfigError, PeriodicPotential

Z = PeriodicPotential.zero()


def box(L=1.0, h=1 / 200, q=None):
    return direct.assemble(Z, q, L, h)


def test_box_eigenvalues_second_order():
    errs = []
    for h in (1 / 100, 1 / 200, 1 / 400):
        H = box(h=h)
        Es = direct.eigenvalues_in(H, 0.0, 40.0)
        exact = [(math.pi * n / 2) ** 2 for n in range(1, len(Es) + 1)]
        assert len(Es) == 4
        errs.append(max(abs(a - b) / b for a, b in zip(Es, exact)))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_constant_shift():
    H = box()
    a = direct.eigenvalues_in(H, 0, 30)
    b = direct.eigenvalues_in(H.shifted(1.5), 1.5, 31.5)
    assert np.allclose(np.array(b) - 1.5, a, atol=1e-10)


def test_count_below_extremes():
    H = box(h=1 / 50)
    lo, hi = H.gershgorin()
    assert direct.count_below(H, lo - 1e-9) == 0
    assert direct.count_below(H, hi + 1e-9) == H.n


def test_count_below_random():
    rng = np.random.default_rng(7)
    d = rng.standard_normal(6)
    e = rng.standard_normal(5)
    H = direct.TruncatedHamiltonian(np.arange(6.0), d, e, np.ones(6), 1.0, 1.0)
    ev = np.linalg.eigvalsh(H.dense())
    for E in rng.uniform(-4, 4, 20):
        assert direct.count_below(H, E) == int(np.sum(ev < E))


def square_well_exact(V0, a):
    # even bound state of -y'' - V0 1_{|x|<a} y = E y, E = -kappa^2
    def f(kappa):
        k = math.sqrt(V0 - kappa ** 2)
        return k * math.tan(k * a) - kappa

    kappa = brentq(f, 1e-12, math.sqrt(V0) * (1 - 1e-12), xtol=1e-15)
    return -kappa ** 2


def well(V0, a):
    def q(x):
        d = np.abs(x) - a
        return np.where(np.abs(d) < 1e-9, -V0 / 2, np.where(d < 0, -V0, 0.0))

    return q


def test_square_well_vs_transcendental():
    V0, a = 0.5, 0.2
    exact = square_well_exact(V0, a)
    assert exact == pytest.approx(-0.0097412, rel=1e-4)
    # a, L commensurate with h so that +-a are nodes (half value there)
    H = direct.assemble(Z, well(V0, a), 100.0, 1 / 200)
    E, _ = direct.gap_eigenvalue(H, (-math.inf, 0.0))
    assert E == pytest.approx(exact, rel=2e-3)


def test_shallow_well_law():
    # E ~ -(V0 a)^2 as the well gets shallow
    rel = []
    for V0 in (0.5, 0.25, 0.125):
        rel.append(abs(square_well_exact(V0, 0.2) / (V0 * 0.2) ** 2 + 1))
    assert rel[0] > rel[1] > rel[2]


def test_narrow_well_limit():
    B = 1.0
    errs, perrs = [], []
    for w in (0.2, 0.1, 0.05):
        q = lambda x, w=w: -(B / (w * math.sqrt(math.pi))) * np.exp(-(x / w) ** 2)  # noqa: E731
        H = direct.assemble(Z, q, 25.0, w / 40)
        E, _ = direct.gap_eigenvalue(H, (-math.inf, 0.0))
        errs.append(abs(E + B * B / 4))
        m = direct.eigenvector(H, E)
        pred = np.exp(-B / 2 * np.abs(m.x))
        psi = m.psi * (pred.max() / m.psi.max())
        perrs.append(float(np.max(np.abs(psi - pred))))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] / (B * B / 4) < 0.05
    assert perrs[0] > perrs[1] > perrs[2]


def test_box_ground_state_shape():
    H = box(h=1 / 400)
    E = direct.eigenvalues_in(H, 0.0, 5.0)[0]
    m = direct.eigenvector(H, E)
    ref = np.cos(math.pi * m.x / 2)
    ref /= math.sqrt(np.sum(H.w * ref ** 2))
    assert np.max(np.abs(m.psi - ref)) < 1e-4
    assert m.residual < 1e-8


def test_no_modes_without_perturbation():
    H = box(L=30.0, h=1 / 32)
    with pytest.raises(direct.NoDefectModeError):
        direct.gap_eigenvalue(H, (-math.inf, 0.0))


def test_boundary_filter():
    H = direct.assemble(Z, lambda x: -np.exp(-x * x), 20.0, 1 / 32)
    E, phi = direct.gap_eigenvalue(H, (-math.inf, 0.0))
    assert direct.boundary_mass_fraction(H, phi) < 1e-6
    # a state living at the wall is dropped
    wall = np.exp(-np.abs(H.x - H.L * 0.97))
    assert direct.boundary_artifact_filter(H, [(E, phi), (0.0, wall)]) == [(E, phi)]
    assert direct.boundary_artifact_filter(H, []) == []


def test_mathieu_tamm_states_filtered():
    # truncating a phase-shifted Mathieu lattice binds surface states in the gaps
    Q = PeriodicPotential.from_fourier({1: np.exp(2j * np.pi * 0.25)})
    h = 1 / 64
    H = direct.assemble(Q, None, 30, h)
    lo = direct.discrete_band_edge(Q, h, 0.5, 0)
    hi = direct.discrete_band_edge(Q, h, 0.5, 1)
    raw = direct.eigenvalues_in(H, lo + 1e-4 * (hi - lo), hi - 1e-4 * (hi - lo))
    assert len(raw) > 0
    from gapmodes.suites import interior_gap_modes

    assert interior_gap_modes(Q, [(0.5, 0)]) == []


def test_discretization_invariance():
    q = lambda x: -0.8 * np.exp(-x * x)  # noqa: E731
    E1, _ = direct.gap_eigenvalue(direct.assemble(Z, q, 20.0, 1 / 64), (-math.inf, 0.0))
    E2, _ = direct.gap_eigenvalue(direct.assemble(Z, q, 20.0, 1 / 128), (-math.inf, 0.0))
    E3, _ = direct.gap_eigenvalue(direct.assemble(Z, q, 25.0, 1 / 128), (-math.inf, 0.0))
    E4, _ = direct.gap_eigenvalue(direct.assemble(Z, q, 40.0, 1 / 128), (-math.inf, 0.0))
    E5, _ = direct.gap_eigenvalue(direct.assemble(Z, q, 50.0, 1 / 128), (-math.inf, 0.0))
    assert abs(E1 - E2) < 1e-4 * abs(E2)
    # wall error ~ exp(-2 kappa L)
    assert abs(E2 - E3) < 1e-8
    assert abs(E4 - E5) < 1e-12


def test_rayleigh_and_residual():
    H = direct.assemble(Z, lambda x: -np.exp(-x * x), 20.0, 1 / 64)
    E, _ = direct.gap_eigenvalue(H, (-math.inf, 0.0))
    m = direct.eigenvector(H, E)
    assert m.rayleigh == pytest.approx(E, abs=1e-12)
    assert m.residual <= 1e-8
    assert math.isfinite(m.localization_length)


def test_ambiguity():
    # a deep well has two bound states below 0
    H = direct.assemble(Z, lambda x: -8 * np.exp(-x * x), 20.0, 1 / 64)
    with pytest.raises(direct.AmbiguityError):
        direct.gap_eigenvalue(H, (-math.inf, 0.0))


def test_graded_mesh_matches_uniform():
    q = lambda x: -np.exp(-x * x)  # noqa: E731
    Hu = direct.assemble(Z, q, 40.0, 1 / 256)
    Hg = direct.assemble_graded(q, 8.0, 1 / 256, 40.0, 0.5)
    Eu, _ = direct.gap_eigenvalue(Hu, (-math.inf, 0.0))
    Eg, _ = direct.gap_eigenvalue(Hg, (-math.inf, 0.0))
    assert Hg.n < Hu.n / 3
    assert Eg == pytest.approx(Eu, rel=1e-6)


def test_assembly_rejections():
    with pytest.raises(ConfigError):
        direct.assemble(Z, None, 1.0, 0.3)
    with pytest.raises(ConfigError):
        direct.assemble(PeriodicPotential.mathieu(), None, 1.5, 1 / 64)
    with pytest.raises(ConfigError):
        direct.assemble(Z, lambda x: np.exp(-x * x / 100), 5.0, 1 / 16)
