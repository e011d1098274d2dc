import numpy as np
import pytest

from pirkit import backend
from pirkit import potentials as P
from pirkit.spectral import discrete_basis, discrete_frequencies

needs_ext = pytest.mark.skipif(not backend.compiled_available(), reason="compiled extension not built")

POTS = [
    P.harmonic(omega=1.3, a=1.0, dim=2),
    P.soft_bumped(omega=1.0, c=0.2, k=2.0, a=1.0, dim=2),
    P.quartic(coef=0.3, a=1.0, dim=2),
]
OBS = ["one", "q", "q2", "tanh", "tanh2"]


@needs_ext
@pytest.mark.parametrize("p", POTS, ids=lambda p: p.name)
@pytest.mark.parametrize("name", OBS)
def test_grid_reduce_agrees(p, name):
    o = P.observable(name, dim=2)
    x = np.random.default_rng(0).standard_normal((50, 33, 2))
    sv_c, so_c = backend.grid_reduce(x, p, o, "cython")
    sv_p, so_p = backend.grid_reduce(x, p, o, "python")
    np.testing.assert_allclose(sv_c, sv_p, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(so_c, so_p, rtol=1e-12, atol=1e-12)


def _run(p, o, which, metropolis):
    D, beta = 8, 1.2
    C = np.ascontiguousarray(discrete_basis(beta, D))
    stiff = discrete_frequencies(beta, D) ** 2 + p.a**2
    g = np.random.default_rng(1)
    xi = g.standard_normal((D, p.dim)) * 0.3
    noise = g.standard_normal((200, D, p.dim))
    log_u = np.log(g.random(200))
    obs, en = np.empty(200), np.empty(200)
    acc, failed = backend.langevin_block(xi, C, stiff, beta / D, p, o, 0.2, noise, log_u, metropolis, obs, en, backend=which)
    return xi, obs, en, acc, failed


@needs_ext
@pytest.mark.parametrize("p", POTS, ids=lambda p: p.name)
@pytest.mark.parametrize("metropolis", [True, False])
def test_langevin_agrees(p, metropolis):
    o = P.observable("tanh2", dim=2)
    xc, oc, ec, ac, fc = _run(p, o, "cython", metropolis)
    xp, op, ep, ap, fp = _run(p, o, "python", metropolis)
    assert (ac, fc) == (ap, fp)
    np.testing.assert_allclose(xc, xp, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(oc, op, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(ec, ep, rtol=1e-10, atol=1e-12)


def test_custom_potential_uses_fallback():
    p = P.PotentialSpec(1, lambda q: np.sum(q**2, axis=-1), lambda q: 2 * q, a=1.0, M1=1.0)
    x = np.zeros((2, 3, 1))
    sv, so = backend.grid_reduce(x, p, P.observable("one"))
    assert np.all(sv == 0) and np.all(so == 3)
    with pytest.raises(RuntimeError):
        backend.grid_reduce(x, p, P.observable("one"), "cython")


def test_backend_flag():
    assert backend.BACKEND in ("cython", "python")
    assert (backend.BACKEND == "cython") == backend.compiled_available()
