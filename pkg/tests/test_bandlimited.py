import math

import numpy as np
import pytest

from gapmodes import bandlimited as bl


def P(A=1.0, B=1.0, beta=1.0, eps=0.1):
    return bl.EffectiveOperatorParams(A, B, beta, eps)


def test_condition_limits():
    p = P(1.0, 2.0)
    assert bl.theta_condition(1.0, p, cutoff=math.inf) == pytest.approx(0.0, abs=1e-15)
    q = P(2.0, 0.7)
    assert bl.theta_condition(q.theta_limit, q, cutoff=math.inf) == pytest.approx(0.0, abs=1e-15)
    assert bl.theta_condition(q.theta_limit, q) > 0
    with pytest.raises(ValueError):
        bl.theta_condition(0.0, p)


def test_condition_monotone():
    for A in (0.5, 2.0):
        for B in (0.5, 2.0):
            p = P(A, B, 1.0, 0.05)
            th = np.geomspace(1e-3, 1e3, 400)
            vals = [bl.theta_condition(t, p) for t in th]
            assert np.all(np.diff(vals) > 0)


def test_params_validation():
    with pytest.raises(ValueError):
        P(A=-1.0)
    with pytest.raises(ValueError):
        P(eps=1.5)


def test_root_example():
    sol = bl.theta0_solve(P(1.0, 1.0, 1.0, 0.1))
    assert 0.5 * 0.98 <= sol.theta0 <= 0.5
    assert sol.residual <= 1e-12
    assert sol.bound_lhs <= sol.bound_rhs


def test_root_converges_to_dirac_limit():
    vals = [bl.theta0_solve(P(1.3, 0.8, 1.0, e)).theta0_squared for e in (0.2, 0.1, 0.05, 0.02, 0.01)]
    lim = 0.8 ** 2 / (4 * 1.3)
    d = [lim - v for v in vals]
    assert all(x > 0 for x in d) and all(a > b for a, b in zip(d, d[1:]))


def test_scaling_invariance():
    c = 1.7
    a = bl.theta0_solve(P(1.0, 1.0, 1.0, 0.1 / c))
    b = bl.theta0_solve(P(c * c, c, 1.0, 0.1))
    assert b.theta0 == pytest.approx(a.theta0, rel=1e-13)


def test_bound_on_grid():
    for row in bl.theta_bound_grid():
        assert row["residual"] <= 1e-12
        assert row["slack"] > 0
        assert row["slope"] >= 0.8 * row["beta"]


def test_kernel_small_eps():
    sol = bl.theta0_solve(P(1.0, 1.0, 1.0, 1e-3))
    ker = bl.kernel_realspace(sol, x_max=20.0)
    assert ker.sup_distance <= 1e-2
    assert ker.asymmetry <= 1e-12


def test_kernel_value_at_origin():
    sol = bl.theta0_solve(P(0.7, 1.9, 1.0, 0.05))
    ker = bl.kernel_realspace(sol, x_max=5.0, dxi_max=1 / 4000)
    i0 = int(np.argmin(np.abs(ker.x)))
    assert ker.x[i0] == 0.0
    assert ker.values[i0] == pytest.approx(1 / 1.9, rel=1e-6)


def test_kernel_rejects_coarse_grid():
    sol = bl.theta0_solve(P())
    with pytest.raises(ValueError):
        bl.kernel_realspace(sol, dx=1.0)


def test_apply_null_vector():
    p = P(1.2, 0.9, 1.0, 0.1)
    sol = bl.theta0_solve(p)
    xi = bl.xi_grid(p, dxi_max=1 / 4000)
    f = sol.kernel(xi, closed=True)
    r = bl.apply_L0(sol.theta0, xi, f, p)
    assert np.linalg.norm(r) <= 1e-8 * np.linalg.norm(f)
    # the open indicator drops the end nodes, so the identity only holds up to O(dxi)
    assert sol.kernel(np.array([p.cutoff]))[0] == 0.0


def test_apply_outside_cutoff_and_linearity():
    p = P(1.0, 1.0, 1.0, 0.2)
    xi = bl.xi_grid(p, pad=50)
    f = np.where(np.abs(xi) > p.cutoff * 1.01, np.cos(xi), 0.0)
    th = 0.4
    assert np.allclose(bl.apply_L0(th, xi, f, p), (4 * np.pi ** 2 * xi ** 2 + th ** 2) * f, rtol=1e-14, atol=0)
    g = np.exp(-xi ** 2)
    lhs = bl.apply_L0(th, xi, 2 * f - 3 * g, p)
    rhs = 2 * bl.apply_L0(th, xi, f, p) - 3 * bl.apply_L0(th, xi, g, p)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(lhs))
    with pytest.raises(ValueError):
        bl.apply_L0(th, np.linspace(-1, 1, 11), np.zeros(11), p)
