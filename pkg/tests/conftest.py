import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from gapmodes import bloch
from gapmodes.potentials import PeriodicPotential


@pytest.fixture(scope="session")
def mathieu():
    return PeriodicPotential.mathieu()


@pytest.fixture(scope="session")
def mathieu_edge(mathieu):
    return bloch.band_edge_analysis(mathieu, 2, 0.0)


def monodromy_trace(Q, E):
    """tr of the one-period transfer matrix of -y'' + Q y = E y (DOP853 shooting)."""

    def rhs(x, y):
        q = Q(np.array([x]))[0] - E
        return [y[1], q * y[0], y[3], q * y[2]]

    sol = solve_ivp(rhs, (0.0, 1.0), [1.0, 0.0, 0.0, 1.0], method="DOP853", rtol=1e-13, atol=1e-14)
    y = sol.y[:, -1]
    return y[0] + y[3]


def half_period_state(Q, E):
    """(y1, y1', y2, y2') at x = 1/2 for the even and odd solutions of an even Q."""

    def rhs(x, y):
        q = Q(np.array([x]))[0] - E
        return [y[1], q * y[0], y[3], q * y[2]]

    sol = solve_ivp(rhs, (0.0, 0.5), [1.0, 0.0, 0.0, 1.0], method="DOP853", rtol=1e-13, atol=1e-14)
    return sol.y[:, -1]


def shooting_eigenvalue(Q, guess, sign, width=1e-3):
    """Periodic (sign +1) or antiperiodic (sign -1) eigenvalue of an even Q nearest to guess.

    Symmetry turns the conditions into simple roots: periodic even y1'(1/2) = 0,
    periodic odd y2(1/2) = 0, antiperiodic even y1(1/2) = 0, antiperiodic odd y2'(1/2) = 0.
    """
    idx = (1, 2) if sign > 0 else (0, 3)
    roots = []
    for i in idx:
        f = lambda E, i=i: half_period_state(Q, E)[i]  # noqa: E731
        a, b = guess - width, guess + width
        if f(a) * f(b) < 0:
            roots.append(brentq(f, a, b, xtol=1e-14, rtol=1e-15))
    if not roots:
        raise AssertionError("no root near the guess")
    return min(roots, key=lambda r: abs(r - guess))
