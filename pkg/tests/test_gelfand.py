import numpy as np
import pytest

from gapmodes import bloch, gelfand, suites
from gapmodes.potentials import PeriodicPotential

K = gelfand.bloch_k_grid(256)


@pytest.fixture(scope="module")
def gauss():
    return gelfand.sample(lambda x: np.exp(-x ** 2))


@pytest.fixture(scope="module")
def mathieu_bands():
    return bloch.band_scan(PeriodicPotential.mathieu(), K, 62, 31)


def test_gaussian_self_duality():
    f = gelfand.sample(lambda x: np.exp(-np.pi * x ** 2))
    F = gelfand.gelfand_transform(f, K)
    j0 = int(np.argmin(np.abs(K)))
    xs = np.arange(F.P) / F.P
    n = np.arange(-8, 9)
    ref = np.exp(2j * np.pi * np.outer(xs, n)) @ np.exp(-np.pi * n ** 2)
    assert np.max(np.abs(F.values()[j0] - ref)) < 1e-12


def test_frequency_slicing_matches_lattice_sum():
    for name, fn in suites.gelfand_corpus():
        f = gelfand.sample(fn)
        F = gelfand.gelfand_transform(f, K)
        assert np.max(np.abs(F.values() - gelfand.poisson_values(f, K))) <= 1e-9, name


def test_band_limited_input_has_single_term():
    # fhat(xi) = sqrt(200 pi) exp(-200 pi^2 xi^2) is below 1e-200 for |xi| >= 1/2
    f = gelfand.sample(lambda x: np.exp(-x ** 2 / 200), X=200)
    F = gelfand.gelfand_transform(f, K)
    fhat = np.sqrt(200 * np.pi) * np.exp(-200 * np.pi ** 2 * K ** 2)
    assert np.max(np.abs(F.values() - fhat[:, None])) < 1e-12


def test_pseudo_periodicity(gauss):
    # ftilde(x; k+1) = exp(-2 pi i x) ftilde(x; k) via the lattice-sum form
    k = np.array([-0.3, 0.7])
    v = gelfand.poisson_values(gauss, k)
    xs = np.arange(v.shape[1]) / v.shape[1]
    assert np.max(np.abs(v[1] - np.exp(-2j * np.pi * xs) * v[0])) < 1e-10


def test_round_trip_and_linearity(gauss):
    g = gelfand.sample(lambda x: np.exp(2j * np.pi * 10 * x) * np.exp(-x ** 2))
    for f in (gauss, g):
        back = gelfand.inverse_transform(gelfand.gelfand_transform(f, K))
        assert np.max(np.abs(back.values - f.values)) <= 1e-8 * np.max(np.abs(f.values))
    F, G = gelfand.gelfand_transform(gauss, K), gelfand.gelfand_transform(g, K)
    a, b = 0.3 - 1j, 2.0
    lhs = gelfand.inverse_transform(a * F + b * G).values
    rhs = a * gelfand.inverse_transform(F).values + b * gelfand.inverse_transform(G).values
    assert np.max(np.abs(lhs - rhs)) < 1e-14


def test_non_uniform_grid_rejected(gauss):
    F = gelfand.gelfand_transform(gauss, np.array([-0.2, 0.1, 0.5]))
    with pytest.raises(ValueError):
        gelfand.inverse_transform(F)


def test_slow_decay_rejected():
    with pytest.raises(ValueError):
        gelfand.gelfand_transform(gelfand.sample(lambda x: 1.0 / (1 + x ** 2)), K)


def test_derivative_rule(gauss):
    fd = gelfand.sample(lambda x: -2 * x * np.exp(-x ** 2))
    lhs = gelfand.gelfand_transform(fd, K).values()
    rhs = gelfand.derivative(gelfand.gelfand_transform(gauss, K)).values()
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_convolution_with_constant_one_is_identity(gauss):
    # the transform of 1 is the delta at k = 0: ftilde(x; k) = delta(k); on the grid, K at k = 0
    F = gelfand.gelfand_transform(gauss, K)
    one = np.zeros((K.size, F.P), complex)
    one[int(np.argmin(np.abs(K))), F.P // 2] = K.size
    G = gelfand.BlochTransform(K, one, F.X)
    assert np.max(np.abs(gelfand.bloch_convolution(F, G).coeffs - F.coeffs)) < 1e-12


def test_convolution_matches_product_transform(gauss):
    g = gelfand.sample(lambda x: np.exp(-(x - 1) ** 2 / 3))
    conv = gelfand.bloch_convolution(gelfand.gelfand_transform(gauss, K), gelfand.gelfand_transform(g, K))
    prod = gelfand.SampledFunction(gauss.x, gauss.values * g.values)
    assert np.max(np.abs(conv.values() - gelfand.gelfand_transform(prod, K).values())) <= 1e-8


def test_convolution_grid_mismatch_rejected(gauss):
    F = gelfand.gelfand_transform(gauss, K)
    G = gelfand.gelfand_transform(gauss, gelfand.bloch_k_grid(128))
    with pytest.raises(ValueError):
        gelfand.bloch_convolution(F, G)


def test_multiplication_rule(gauss):
    V = lambda x: 2 * np.cos(2 * np.pi * x) - 0.7 * np.sin(6 * np.pi * x)  # noqa: E731
    Vf = gelfand.SampledFunction(gauss.x, V(gauss.x) * gauss.values)
    lhs = gelfand.gelfand_transform(Vf, K).values()
    rhs = gelfand.multiply_periodic(gelfand.gelfand_transform(gauss, K), V).values()
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_free_projection_is_folded_fourier_transform(gauss):
    bs = bloch.band_scan(PeriodicPotential.zero(), K, 6, 31)
    F = gelfand.gelfand_transform(gauss, K)
    T = gelfand.project_modes(F, bs)
    # band b at k is the plane wave exp(2 pi i n x) with the b-th smallest (n + k)^2
    for j in (10, 128, 200):
        order = np.argsort((np.arange(-31, 32) + K[j]) ** 2, kind="stable")[:6] - 31
        fhat = np.sqrt(np.pi) * np.exp(-(np.pi * (K[j] + order)) ** 2)
        assert np.allclose(np.abs(T[:, j]), np.abs(fhat), atol=1e-12)


def test_projection_concentrates_on_source_band(mathieu_bands):
    b0, j0 = 2, 100
    coeffs = np.zeros((K.size, 64), complex)
    bump = np.exp(-((K - K[j0]) / 0.02) ** 2)
    for j in range(K.size):
        coeffs[j, 32 - 31:32 + 32] = bump[j] * mathieu_bands.p_coeffs[j, b0]
    F = gelfand.BlochTransform(K, coeffs, 40)
    T = gelfand.project_modes(F, mathieu_bands)
    w = np.sum(np.abs(T) ** 2, axis=1)
    assert w[b0] / w.sum() > 1 - 1e-12


def test_parseval_and_completeness(gauss, mathieu_bands):
    F = gelfand.gelfand_transform(gauss, K)
    tot, tail, _ = gelfand.xs_norm(F, mathieu_bands, 0)
    assert abs(tot - gelfand.l2_norm_sq(gauss)) <= 1e-8 * tot
    assert gelfand.completeness_residual(F, mathieu_bands) <= 1e-6


def test_xs_norm_monotone_in_s(gauss, mathieu_bands):
    F = gelfand.gelfand_transform(gauss, K)
    vals = [gelfand.xs_norm(F, mathieu_bands, s)[0] for s in (0, 1, 2)]
    assert vals[0] <= vals[1] <= vals[2]


def test_xs_hs_bracket_on_corpus(mathieu_bands):
    for s in (0, 1, 2):
        r = []
        for _, fn in suites.gelfand_corpus():
            f = gelfand.sample(fn)
            F = gelfand.gelfand_transform(f, K)
            r.append(gelfand.xs_norm(F, mathieu_bands, s)[0] / gelfand.hs_norm_sq(f, s))
        assert max(r) / min(r) < 50


def test_heatmap_csv(gauss, mathieu_bands):
    F = gelfand.gelfand_transform(gauss, K)
    text = F.heatmap_csv(gelfand.project_modes(F, mathieu_bands)[:2], "config_hash=x")
    lines = text.splitlines()
    assert lines[1] == "b,k,magnitude" and len(lines) == 2 + 2 * K.size
