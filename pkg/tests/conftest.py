import pytest

from pirkit import potentials as P


@pytest.fixture
def harmonic():
    return P.harmonic(omega=1.0)


@pytest.fixture
def bumped():
    return P.soft_bumped(omega=1.0, c=0.2, k=2.0, a=1.0)
