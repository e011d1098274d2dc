"""Normal-mode basis of the imaginary-time torus and the Gaussian loop measure.

The basis is the orthonormal eigenbasis of ``-d^2/dtau^2`` on ``[0, beta]``::

    c_0 = sqrt(1/beta)
    c_{2k-1} = sqrt(2/beta) sin(2 k pi tau / beta)     omega = 2 k pi / beta
    c_{2k}   = sqrt(2/beta) cos(2 k pi tau / beta)

Loops are stored as mode coefficients ``xi`` of shape ``(N, d)``; grid values
are derived on demand. The Gaussian measure ``nu`` draws each ``xi_k``
independently from ``N(0, I / (omega_k^2 + a^2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng

__all__ = [
    "NormalModeLoop",
    "RingPolymer",
    "SpectralBasis",
    "c0_constant",
    "covariance",
    "covariance_tail_bound",
    "discrete_basis",
    "discrete_frequencies",
    "eval_mode",
    "grid_to_modes",
    "increment_msd",
    "loop_eval",
    "mode_frequencies",
    "modes_to_grid",
    "nu_block",
    "sample_nu",
]


def mode_frequencies(beta: float, N: int) -> np.ndarray:
    k = np.arange(N)
    return 2.0 * np.pi * ((k + 1) // 2) / beta


def mode_values(beta: float, N: int, taus) -> np.ndarray:
    """Matrix ``C[k, j] = c_k(taus[j])`` of shape ``(N, len(taus))``."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    k = np.arange(N)
    m = ((k + 1) // 2)[:, None]
    phase = 2.0 * np.pi * m * taus[None, :] / beta
    out = np.where((k % 2 == 1)[:, None], np.sin(phase), np.cos(phase))
    out *= math.sqrt(2.0 / beta)
    out[0] = math.sqrt(1.0 / beta)
    return out


@dataclass(frozen=True)
class SpectralBasis:
    beta: float
    N: int

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")

    @property
    def frequencies(self) -> np.ndarray:
        return mode_frequencies(self.beta, self.N)

    def values(self, taus) -> np.ndarray:
        return mode_values(self.beta, self.N, taus)


@dataclass(frozen=True)
class NormalModeLoop:
    basis: SpectralBasis
    xi: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if xi.ndim == 1:
            xi = xi[:, None]
        if xi.ndim != 2 or xi.shape[0] != self.basis.N:
            raise ValueError(f"xi must have shape (N={self.basis.N}, d), got {xi.shape}")
        object.__setattr__(self, "xi", xi)

    @property
    def dim(self) -> int:
        return self.xi.shape[1]


@dataclass(frozen=True)
class RingPolymer:
    beta: float
    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError(f"x must have shape (D, d), got {x.shape}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        object.__setattr__(self, "x", x)

    @property
    def D(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def beta_D(self) -> float:
        return self.beta / self.D


def eval_mode(basis: SpectralBasis, k: int, tau):
    if not 0 <= k < basis.N:
        raise ValueError(f"mode index {k} outside [0, {basis.N})")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0) or np.any(tau > basis.beta):
        raise ValueError("tau must lie in [0, beta]")
    if k == 0:
        val = np.full_like(tau, math.sqrt(1.0 / basis.beta))
    else:
        phase = 2.0 * np.pi * ((k + 1) // 2) * tau / basis.beta
        val = math.sqrt(2.0 / basis.beta) * (np.sin(phase) if k % 2 else np.cos(phase))
    return float(val) if val.ndim == 0 else val


def loop_eval(loop: NormalModeLoop, tau) -> np.ndarray:
    """``x_N(tau)``; shape ``(d,)`` for scalar ``tau``, ``(m, d)`` otherwise."""
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0) or np.any(t > loop.basis.beta):
        raise ValueError("tau must lie in [0, beta]")
    vals = loop.basis.values(np.atleast_1d(t)).T @ loop.xi
    return vals[0] if t.ndim == 0 else vals


# --- grid <-> modes ------------------------------------------------------------


def discrete_basis(beta: float, D: int, N: int | None = None) -> np.ndarray:
    """``C[j, k] = c_k(j beta_D)`` for ``k < N``, shape ``(D, N)``.

    At even ``D`` with ``N = D`` the top index is the Nyquist pair, whose sine
    vanishes on every grid point; it is replaced by ``sqrt(1/beta) (-1)^j`` so
    that ``beta_D C^T C = I`` and the map stays a bijection.
    """
    N = D if N is None else N
    if N > D:
        raise ValueError(f"N={N} modes cannot be resolved by D={D} grid points")
    taus = np.arange(D) * (beta / D)
    C = mode_values(beta, N, taus).T
    if D % 2 == 0 and N == D:
        C[:, D - 1] = math.sqrt(1.0 / beta) * (1.0 - 2.0 * (np.arange(D) % 2))
    return C


def discrete_frequencies(beta: float, D: int) -> np.ndarray:
    """Ring-polymer normal-mode frequencies ``(2 / beta_D) sin(m pi / D)``,
    ``m = ceil(k / 2)``; they tend to ``2 m pi / beta`` as ``D`` grows."""
    beta_D = beta / D
    m = (np.arange(D) + 1) // 2
    return (2.0 / beta_D) * np.sin(m * np.pi / D)


def grid_to_modes(rp: RingPolymer, N: int | None = None) -> NormalModeLoop:
    N = rp.D if N is None else N
    if N > rp.D:
        raise ValueError(f"N={N} exceeds D={rp.D}; the grid would alias the upper modes")
    C = discrete_basis(rp.beta, rp.D, N)
    xi = rp.beta_D * (C.T @ rp.x)
    return NormalModeLoop(SpectralBasis(rp.beta, N), xi)


def modes_to_grid(loop: NormalModeLoop, D: int | None = None) -> RingPolymer:
    N = loop.basis.N
    D = N if D is None else D
    if D < N:
        raise ValueError(f"D={D} grid points cannot represent N={N} modes")
    C = discrete_basis(loop.basis.beta, D, N)
    return RingPolymer(loop.basis.beta, C @ loop.xi)


# --- Gaussian loop measure -----------------------------------------------------


def _mode_std(beta: float, N: int, a: float) -> np.ndarray:
    if not a > 0:
        raise ValueError(f"a must be positive for the loop measure to exist, got {a}")
    return 1.0 / np.sqrt(mode_frequencies(beta, N) ** 2 + a * a)


def sample_nu(basis: SpectralBasis, d: int, a: float, gen: np.random.Generator, size: int | None = None):
    """Draw from ``nu`` with an explicit generator.

    Returns a :class:`NormalModeLoop` when ``size`` is None, else the raw
    coefficient array of shape ``(size, N, d)``.
    """
    std = _mode_std(basis.beta, basis.N, a)
    if size is None:
        return NormalModeLoop(basis, gen.standard_normal((basis.N, d)) * std[:, None])
    return gen.standard_normal((size, basis.N, d)) * std[None, :, None]


def nu_block(beta: float, N: int, d: int, a: float, n: int, seed: int, block: int, chain: int = 0) -> np.ndarray:
    """Coefficients for one block of ``n`` loops, shape ``(n, N, d)``.

    Each mode has its own stream, so the first ``N`` modes of a draw are the
    same whatever ``N`` is requested. Estimators at different truncation
    levels therefore share random numbers exactly.
    """
    std = _mode_std(beta, N, a)
    out = np.empty((n, N, d))
    for k in range(N):
        g = rng.stream(seed, chain, block, lane=(rng.LANE_NU << 24) | k)
        out[:, k, :] = g.standard_normal((n, d)) * std[k]
    return out


def c0_constant(d: int, beta: float, a: float) -> float:
    """``E_nu int_0^beta |x|^2 dtau = (d beta / 2a) coth(a beta / 2)``."""
    if not a > 0:
        raise ValueError("a must be positive")
    return d * beta / (2.0 * a) / math.tanh(0.5 * a * beta)


def covariance_tail_bound(beta: float, K: int) -> float:
    """Bound on the dropped tail ``sum_{k>K} 2 / (beta (2 k pi / beta)^2)``."""
    return beta / (2.0 * np.pi**2 * K)


def covariance(beta: float, a: float, tau, method: str = "closed", K_max: int = 100_000):
    """Per-dimension loop covariance ``E_nu[x(0) . x(tau)] / d``.

    ``closed`` is the periodic Green's function of ``-d^2/dtau^2 + a^2``,
    ``spectral`` truncates the mode sum at ``K_max`` frequency pairs, and
    ``mehler`` inverts the 2x2 precision of the joint Mehler density of
    ``(x(0), x(tau))``.
    """
    if not a > 0 or not beta > 0:
        raise ValueError("beta and a must be positive")
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0) or np.any(t > beta):
        raise ValueError("tau must lie in [0, beta]")
    if method == "closed":
        # cosh(a(beta/2 - tau)) / (2a sinh(a beta/2)), written without overflow
        out = (np.exp(-a * t) + np.exp(-a * (beta - t))) / (2.0 * a * -np.expm1(-a * beta))
    elif method == "spectral":
        k = np.arange(1, K_max + 1, dtype=float)
        w = 2.0 * np.pi * k / beta
        coef = 1.0 / (w * w + a * a)
        tt = np.atleast_1d(t)
        s = np.array([np.dot(coef, np.cos(w * ti)) for ti in tt.ravel()]).reshape(tt.shape)
        out = (1.0 / (a * a) + 2.0 * s) / beta
        out = out.reshape(t.shape)
    elif method == "mehler":
        if np.any(t <= 0) or np.any(t >= beta):
            raise ValueError("mehler covariance is singular at tau in {0, beta}")
        s = beta - t
        A = a / np.tanh(a * t) + a / np.tanh(a * s)
        B = a / np.sinh(a * t) + a / np.sinh(a * s)
        out = B / ((A - B) * (A + B))
    else:
        raise ValueError(f"unknown covariance method {method!r}")
    return float(out) if np.ndim(out) == 0 else out


def increment_msd(beta: float, a: float, d: int, tau1: float, tau2: float, N: int | None = None) -> float:
    """``E_nu |x(tau1) - x(tau2)|^2``.

    With ``N`` given, the exact value for the ``N``-mode truncated loop;
    with ``N=None``, the full loop via ``2d (C(0) - C(|tau1 - tau2|))``.
    """
    for t in (tau1, tau2):
        if not 0 <= t <= beta:
            raise ValueError("tau must lie in [0, beta]")
    if N is None:
        delta = abs(tau1 - tau2)
        return float(2 * d * (covariance(beta, a, 0.0) - covariance(beta, a, delta)))
    C = mode_values(beta, N, [tau1, tau2])
    diff = C[:, 0] - C[:, 1]
    w = mode_frequencies(beta, N)
    return float(d * np.sum(diff * diff / (w * w + a * a)))
