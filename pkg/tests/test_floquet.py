import math

import numpy as np
import pytest

from gapmodes import bloch, direct, floquet
from gapmodes.potentials import PeriodicPotential

E_REF = 10.6010719081  # Mathieu (amplitude 2), band 1 at k = 1/2, q = -3 exp(-x^2)


def gauss(a):
    return lambda x: -a * np.exp(-x * x)


@pytest.fixture(scope="module")
def edge(mathieu):
    return bloch.band_edge_analysis(mathieu, 1, 0.5)


@pytest.fixture(scope="module")
def mode(mathieu, edge):
    return floquet.solve_defect(mathieu, gauss(3.0), edge.E_star, 0.5, side=-1,
                                gap_width=edge.gap[1] - edge.gap[0], n_per=2000)


def test_against_finite_differences(mathieu, edge, mode):
    assert mode.E_eps == pytest.approx(E_REF, abs=1e-9)
    assert edge.gap[0] < mode.E_eps < edge.gap[1]
    Es = []
    for h in (1 / 256, 1 / 512):
        H = direct.assemble(mathieu, gauss(3.0), 250, h)
        lo = direct.discrete_band_edge(mathieu, h, 0.5, 0)
        hi = direct.discrete_band_edge(mathieu, h, 0.5, 1)
        Es.append(direct.gap_eigenvalue(H, (lo, hi))[0])
    rich = Es[1] + (Es[1] - Es[0]) / 3
    assert abs(Es[1] - mode.E_eps) < 1e-4
    assert rich == pytest.approx(mode.E_eps, abs=1e-8)


def test_free_background_matches_fd():
    Z = PeriodicPotential.zero()
    m = floquet.solve_defect(Z, gauss(1.0), 0.0, 0.0, side=-1, n_per=2000)
    Es = [direct.gap_eigenvalue(direct.assemble(Z, gauss(1.0), 40.0, h), (-math.inf, 0.0))[0]
          for h in (1 / 256, 1 / 512)]
    rich = Es[1] + (Es[1] - Es[0]) / 3
    assert rich == pytest.approx(m.E_eps, abs=1e-9)
    # exterior decay exp(-sqrt(-E)|x|)
    assert m.localization_length == pytest.approx(1 / math.sqrt(-m.E_eps), rel=1e-8)


def test_step_convergence(mathieu, edge):
    vals = [floquet.solve_defect(mathieu, gauss(3.0), edge.E_star, 0.5, side=-1,
                                 gap_width=edge.gap[1] - edge.gap[0], n_per=n).E_eps
            for n in (250, 500, 1000)]
    d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
    # fourth-order Magnus steps
    assert d1 / d2 > 10


def test_mode_properties(mode):
    assert mode.n_roots == 1
    assert mode.residual < 1e-10
    assert abs(mode.mu_left) > 1 > abs(mode.mu_right)
    assert mode.shift == pytest.approx(mode.E_eps - 10.856778202315828, abs=1e-9)


def test_psi_decays_and_is_continuous(mode):
    X0 = mode.problem.X0
    x = np.array([X0 - 1e-9, X0 + 1e-9, -X0 - 1e-9, -X0 + 1e-9])
    p = mode.psi(x)
    assert p[0] == pytest.approx(p[1], rel=1e-6)
    assert p[2] == pytest.approx(p[3], rel=1e-6)
    far = mode.psi(np.array([X0 + 100.25]))[0]
    near = mode.psi(np.array([X0 + 0.25]))[0]
    assert abs(far / near) == pytest.approx(abs(mode.mu_right) ** 100, rel=1e-8)


def test_gauss_zero_has_no_mode(mathieu, edge):
    with pytest.raises(floquet.NoDefectModeError):
        floquet.solve_defect(mathieu, lambda x: 1e-3 * np.exp(-x * x), edge.E_star, 0.5, side=-1,
                             gap_width=edge.gap[1] - edge.gap[0], n_per=500)


def test_profile_error_free():
    # -psi'' - 2 a delta_w psi: narrow well, psi ~ exp(-a|x|) with E = -a^2
    Z = PeriodicPotential.zero()
    edge = bloch.band_edge_analysis(Z, 0, 0.0)
    u = floquet.u_star_callable(edge)
    errs = []
    for w in (0.1, 0.05):
        q = lambda x, w=w: -(1 / (w * math.sqrt(math.pi))) * np.exp(-(x / w) ** 2)  # noqa: E731
        m = floquet.solve_defect(Z, q, 0.0, 0.0, side=-1, n_per=4000)
        err, _ = floquet.profile_error(m, u, lambda y: np.exp(-0.5 * np.abs(y)), 1.0)
        errs.append(err / abs(u(np.array([0.0]))[0]))
    assert errs[1] < errs[0] < 0.1
