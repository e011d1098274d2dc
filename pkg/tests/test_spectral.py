import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pirkit import rng
from pirkit import spectral as S


def test_frequencies_pairs():
    w = S.SpectralBasis(2.0, 7).frequencies
    assert w[0] == 0.0
    for k in (1, 2, 3):
        assert w[2 * k - 1] == w[2 * k] == pytest.approx(2 * k * math.pi / 2.0)


def test_continuous_orthonormality():
    beta, N = 1.7, 16
    m = 2048
    taus = np.arange(m) * beta / m
    C = S.mode_values(beta, N, taus)
    gram = (beta / m) * C @ C.T
    assert np.max(np.abs(gram - np.eye(N))) < 1e-10


def test_eval_mode_examples():
    assert S.eval_mode(S.SpectralBasis(4.0, 3), 0, 1.3) == pytest.approx(0.5, abs=1e-15)
    b = S.SpectralBasis(2 * math.pi, 3)
    assert S.eval_mode(b, 2, 0.0) == pytest.approx(math.sqrt(1 / math.pi), abs=1e-15)
    assert S.eval_mode(S.SpectralBasis(3.3, 3), 1, 0.0) == 0.0


def test_eval_mode_range():
    b = S.SpectralBasis(1.0, 3)
    with pytest.raises(ValueError):
        S.eval_mode(b, 3, 0.1)
    with pytest.raises(ValueError):
        S.eval_mode(b, -1, 0.1)


def test_loop_eval_examples():
    b = S.SpectralBasis(2 * math.pi, 4)
    assert np.all(S.loop_eval(S.NormalModeLoop(b, np.zeros((4, 2))), 1.0) == 0)
    v = np.array([1.5, -2.0])
    xi = np.zeros((4, 2))
    xi[0] = v
    np.testing.assert_allclose(S.loop_eval(S.NormalModeLoop(b, xi), [0.0, 2.0, 5.0]), np.tile(v / math.sqrt(b.beta), (3, 1)))
    xi = np.zeros((4, 1))
    xi[1, 0] = 1.0
    # c_1(pi/2) at beta = 2 pi is sqrt(1/pi) sin(pi/2)
    assert S.loop_eval(S.NormalModeLoop(b, xi), math.pi / 2)[0] == pytest.approx(math.sqrt(1 / math.pi), abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), N=st.integers(1, 40))
def test_loop_periodic(seed, N):
    xi = np.random.default_rng(seed).standard_normal((N, 2))
    loop = S.NormalModeLoop(S.SpectralBasis(1.9, N), xi)
    assert np.max(np.abs(S.loop_eval(loop, 0.0) - S.loop_eval(loop, 1.9))) < 1e-10


@pytest.mark.parametrize("D", [2, 3, 4, 8, 64])
def test_discrete_orthonormality(D):
    beta = 1.3
    C = S.discrete_basis(beta, D)
    assert np.max(np.abs((beta / D) * C.T @ C - np.eye(D))) < 1e-12


def test_grid_to_modes_examples():
    beta, D = 2.0, 8
    v = np.array([0.7, -1.1])
    loop = S.grid_to_modes(S.RingPolymer(beta, np.tile(v, (D, 1))))
    np.testing.assert_allclose(loop.xi[0], v * math.sqrt(beta), atol=1e-13)
    assert np.max(np.abs(loop.xi[1:])) < 1e-13
    c1 = S.mode_values(beta, 2, np.arange(D) * beta / D)[1]
    xi = S.grid_to_modes(S.RingPolymer(beta, c1)).xi[:, 0]
    assert xi[1] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(np.delete(xi, 1))) < 1e-12


@pytest.mark.parametrize("D", [1, 2, 5, 8, 33])
def test_round_trip(D):
    x = np.random.default_rng(D).standard_normal((D, 3))
    rp = S.RingPolymer(0.9, x)
    back = S.modes_to_grid(S.grid_to_modes(rp))
    assert np.max(np.abs(back.x - x)) < 1e-12


def test_modes_to_grid_examples():
    beta = 2.0
    b = S.SpectralBasis(beta, 3)
    assert np.all(S.modes_to_grid(S.NormalModeLoop(b, np.zeros((3, 1))), 8).x == 0)
    xi = np.zeros((3, 1))
    xi[0, 0] = 0.4 * math.sqrt(beta)
    np.testing.assert_allclose(S.modes_to_grid(S.NormalModeLoop(b, xi), 8).x, 0.4, atol=1e-15)
    xi = np.zeros((3, 1))
    xi[1, 0] = 1.0
    grid = S.modes_to_grid(S.NormalModeLoop(b, xi), 8).x[:, 0]
    expect = [S.eval_mode(b, 1, j * beta / 8) for j in range(8)]
    np.testing.assert_allclose(grid, expect, atol=1e-15)


def test_aliasing_rejected():
    with pytest.raises(ValueError):
        S.grid_to_modes(S.RingPolymer(1.0, np.zeros((4, 1))), 5)
    with pytest.raises(ValueError):
        S.modes_to_grid(S.NormalModeLoop(S.SpectralBasis(1.0, 5), np.zeros((5, 1))), 4)


def test_discrete_frequencies_limit():
    beta = 2.0
    w = S.mode_frequencies(beta, 9)
    wD = S.discrete_frequencies(beta, 4096)[:9]
    np.testing.assert_allclose(wD, w, rtol=1e-5)


def test_nu_variances():
    n = 1_000_000
    xi = S.sample_nu(S.SpectralBasis(2 * math.pi, 3), 1, 1.0, rng.stream(11, lane=rng.LANE_NU), size=n)[:, :, 0]
    assert np.var(xi[:, 0]) == pytest.approx(1.0, abs=0.01)
    assert np.var(xi[:, 1]) == pytest.approx(0.5, abs=0.005)
    for k in range(3):
        assert abs(xi[:, k].mean()) < 5 * xi[:, k].std() / math.sqrt(n)


def test_nu_requires_positive_a():
    with pytest.raises(ValueError):
        S.sample_nu(S.SpectralBasis(1.0, 3), 1, 0.0, rng.stream(0))


def test_nu_block_nested_across_N():
    small = S.nu_block(1.0, 4, 2, 1.0, 100, seed=3, block=2)
    big = S.nu_block(1.0, 16, 2, 1.0, 100, seed=3, block=2)
    assert np.array_equal(big[:, :4], small)


def test_covariance_examples():
    assert S.covariance(2.0, 1.0, 0.0) == pytest.approx(1 / math.tanh(1.0) / 2, rel=1e-14)
    assert S.covariance(2.0, 1.0, 0.0) == pytest.approx(0.656518, abs=1e-6)
    t = 2.0 / 3
    assert abs(S.covariance(2.0, 1.0, t, "spectral") - S.covariance(2.0, 1.0, t)) < 1e-8
    taus = np.linspace(0, 2, 41)
    sym = np.abs(S.covariance(2.0, 1.0, taus) - S.covariance(2.0, 1.0, 2.0 - taus))
    assert np.max(sym) <= 4 * np.finfo(float).eps


def test_covariance_triple_agreement():
    taus = np.round(np.arange(1, 20) * 0.1, 12)
    closed = S.covariance(2.0, 1.0, taus)
    assert np.max(np.abs(S.covariance(2.0, 1.0, taus, "spectral", K_max=100_000) - closed)) < 1e-8
    assert np.max(np.abs(S.covariance(2.0, 1.0, taus, "mehler") - closed)) < 1e-10


def test_printed_squared_form_disagrees():
    # B^2/(A^2-B^2) in place of B/(A^2-B^2) misses the closed form by O(1)
    beta, a, t = 2.0, 1.0, 0.7
    A = a / math.tanh(a * t) + a / math.tanh(a * (beta - t))
    B = a / math.sinh(a * t) + a / math.sinh(a * (beta - t))
    assert abs(B * B / (A * A - B * B) - S.covariance(beta, a, t)) > 0.1


def test_covariance_integrates_to_c0():
    beta, a = 2.0, 1.0
    m = 20000
    taus = (np.arange(m) + 0.5) * beta / m
    integral = beta / m * np.sum(S.covariance(beta, a, taus))
    # d * beta * C(0) is C_0; the zero mode alone gives int_0^beta C = 1/a^2
    assert beta * S.covariance(beta, a, 0.0) == pytest.approx(S.c0_constant(1, beta, a), rel=1e-14)
    assert integral == pytest.approx(1.0 / a**2, rel=1e-8)


def test_covariance_errors():
    with pytest.raises(ValueError):
        S.covariance(2.0, 1.0, 0.0, "mehler")
    with pytest.raises(ValueError):
        S.covariance(2.0, 1.0, 2.0, "mehler")
    with pytest.raises(ValueError):
        S.covariance(2.0, 1.0, 0.5, "fourier")


def test_tail_bound_covers_truncation():
    beta, a, t = 2.0, 1.0, 0.3
    for K in (10, 100, 1000):
        err = abs(S.covariance(beta, a, t, "spectral", K_max=K) - S.covariance(beta, a, t))
        assert err <= S.covariance_tail_bound(beta, K)


def test_c0_examples():
    assert S.c0_constant(1, 2.0, 1.0) == pytest.approx(1 / math.tanh(1.0), rel=1e-15)
    assert S.c0_constant(1, 2.0, 1.0) == pytest.approx(1.31304, abs=1e-5)
    assert S.c0_constant(4, 1.3, 0.7) == pytest.approx(2 * S.c0_constant(2, 1.3, 0.7), rel=1e-15)


def test_increment_msd_examples():
    assert S.increment_msd(2.0, 1.0, 1, 0.4, 0.4) == 0.0
    assert S.increment_msd(2.0, 1.0, 1, 0.4, 0.4, N=64) == 0.0
    for N in (None, 33):
        assert S.increment_msd(2.0, 1.0, 2, 0.0, 2.0 - 0.3, N=N) == pytest.approx(
            S.increment_msd(2.0, 1.0, 2, 0.0, 0.3, N=N), rel=1e-12
        )


def test_increment_bound_random_pairs():
    g = np.random.default_rng(0)
    for beta in (1.0, 2.0, 8.0):
        for a in (0.5, 1.0, 2.0):
            for _ in range(100):
                t1, t2 = g.uniform(0, beta, 2)
                assert S.increment_msd(beta, a, 1, t1, t2) <= (2 * beta + 1) * abs(t1 - t2) + 1e-15


def test_increment_finite_N_approaches_full():
    full = S.increment_msd(1.0, 1.0, 1, 0.1, 0.35)
    assert S.increment_msd(1.0, 1.0, 1, 0.1, 0.35, N=4001) == pytest.approx(full, rel=1e-3)


def test_parseval():
    N, beta = 24, 1.5
    xi = np.random.default_rng(2).standard_normal((N, 2))
    loop = S.NormalModeLoop(S.SpectralBasis(beta, N), xi)
    m = 4096
    x = S.loop_eval(loop, np.arange(m) * beta / m)
    assert abs(beta / m * np.sum(x * x) - np.sum(xi * xi)) < 1e-10
