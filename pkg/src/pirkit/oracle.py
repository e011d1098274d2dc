"""Exact references in one dimension: Mehler and heat kernels, a finite-difference
Hamiltonian eigensolver, and a grid-level Trotter product.

These are the ground truth for every estimator test, so they are kept
independent of the sampling code: nothing here draws random numbers.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from .potentials import ObservableSpec, PotentialSpec

__all__ = [
    "ExactReference",
    "GridHamiltonian",
    "OracleError",
    "exact_thermal_average",
    "heat_kernel",
    "mehler_diagonal_average",
    "mehler_kernel",
    "trotter_trace",
]

# Boltzmann factors below exp(-40) are dropped from thermal sums.
_SPECTRAL_CUTOFF = 40.0
_BOUNDARY_MASS_TOL = 1e-10


class OracleError(RuntimeError):
    """Resolution or domain too coarse for a trusted reference."""

    def __init__(self, message: str, drift: float | None = None):
        super().__init__(message)
        self.drift = drift


def _as_points(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q.reshape(1) if q.ndim == 0 else q


def mehler_kernel(q, q_tilde, beta: float, a: float, log: bool = False):
    """``<q| exp(-beta H^a) |q~>`` for ``H^a = p^2/2 + a^2 |q|^2 / 2``.

    Evaluated in log space; ``sinh(a beta)`` never overflows.
    """
    if not a > 0 or not beta > 0:
        raise ValueError("a and beta must be positive")
    q = _as_points(q)
    qt = _as_points(q_tilde)
    d = q.shape[-1]
    x = a * beta
    # log sinh(x) = x + log1p(-exp(-2x)) - log 2
    log_sinh = x + math.log1p(-math.exp(-2.0 * x)) - math.log(2.0)
    inv_tanh = 1.0 / math.tanh(x)
    inv_sinh = math.exp(-log_sinh)
    quad = a * (inv_tanh * 0.5 * (np.sum(q * q, axis=-1) + np.sum(qt * qt, axis=-1)) - inv_sinh * np.sum(q * qt, axis=-1))
    out = 0.5 * d * (math.log(a / (2.0 * math.pi)) - log_sinh) - quad
    if not log:
        out = np.exp(out)
    return float(out) if np.ndim(out) == 0 else out


def heat_kernel(q, q_tilde, beta: float, log: bool = False):
    """Free-particle kernel ``(2 pi beta)^{-d/2} exp(-|q - q~|^2 / 2 beta)``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    q = _as_points(q)
    qt = _as_points(q_tilde)
    d = q.shape[-1]
    r2 = np.sum((q - qt) ** 2, axis=-1)
    out = -0.5 * d * math.log(2.0 * math.pi * beta) - r2 / (2.0 * beta)
    if not log:
        out = np.exp(out)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GridHamiltonian:
    """``-1/2 d^2/dq^2 + V`` on ``n_grid`` equispaced points in ``[-Q, Q]``
    with Dirichlet walls one spacing outside; stored in tridiagonal form."""

    q: np.ndarray
    h: float
    diag: np.ndarray
    offdiag: np.ndarray

    @classmethod
    def build(cls, p: PotentialSpec, n_grid: int, Q: float) -> GridHamiltonian:
        if p.dim != 1:
            raise ValueError("the grid oracle is one-dimensional")
        if n_grid < 3 or not Q > 0:
            raise ValueError("need n_grid >= 3 and Q > 0")
        q = np.linspace(-Q, Q, n_grid)
        h = q[1] - q[0]
        V = p.eval(q[:, None])
        return cls(q, h, 1.0 / h**2 + V, np.full(n_grid - 1, -0.5 / h**2))

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def thermal_states(self, beta: float):
        """Eigenpairs with ``beta (E - E_0) <= 40``."""
        E0 = eigh_tridiagonal(self.diag, self.offdiag, eigvals_only=True, select="i", select_range=(0, 0))[0]
        hi = E0 + _SPECTRAL_CUTOFF / beta
        E, U = eigh_tridiagonal(self.diag, self.offdiag, select="v", select_range=(E0 - 1.0, hi))
        return E, U


@dataclass(frozen=True)
class ExactReference:
    beta: float
    potential: dict
    observable: str
    value: float
    log_Z: float
    n_grid: int
    Q: float
    drift: float
    levels: dict = field(default_factory=dict)
    trusted: bool = True


def _boundary_mass(weights: np.ndarray, q: np.ndarray, Q: float) -> float:
    edge = np.abs(q) > 0.95 * Q
    return float(np.sum(weights[edge]))


def _thermal_on_grid(p: PotentialSpec, o: ObservableSpec, beta: float, n_grid: int, Q: float):
    H = GridHamiltonian.build(p, n_grid, Q)
    E, U = H.thermal_states(beta)
    boltz = np.exp(-beta * (E - E[0]))
    dens = (U * U) @ boltz / boltz.sum()
    mass = _boundary_mass(dens, H.q, Q)
    if mass > _BOUNDARY_MASS_TOL:
        raise OracleError(f"thermal density leaks to the box edge (mass {mass:.2e}); increase Q")
    O = o.eval(H.q[:, None])
    value = float(dens @ O)
    # trace of exp(-beta H) for the continuum normalisation of eigenvectors
    log_Z = float(-beta * E[0] + np.log(boltz.sum()))
    return value, log_Z, H.h


def _richardson(f_coarse, h_coarse, f_fine, h_fine):
    r2 = (h_coarse / h_fine) ** 2
    return (r2 * f_fine - f_coarse) / (r2 - 1.0)


def default_box(a: float, beta: float | None = None) -> float:
    """``max(8, 6/sqrt(a))``, widened to 7.5 thermal widths of the reference
    oscillator ``a`` when ``beta`` is small enough to need it."""
    Q = max(8.0, 6.0 / math.sqrt(a))
    if beta is not None:
        Q = max(Q, 7.5 * math.sqrt(0.5 / (a * math.tanh(0.5 * a * beta))))
    return Q


def _cache_key(p, o, beta, n_grid, Q) -> str:
    blob = json.dumps([p.describe(), o.describe(), beta, n_grid, Q], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def exact_thermal_average(
    p: PotentialSpec,
    o: ObservableSpec,
    beta: float,
    n_grid: int = 2048,
    Q: float | None = None,
    tol: float = 1e-7,
    cache_dir: str | os.PathLike | None = None,
) -> ExactReference:
    """``Tr[e^{-beta H} O] / Tr[e^{-beta H}]`` by diagonalising the grid Hamiltonian.

    The grid is solved at ``n_grid // 2``, ``n_grid`` and ``2 n_grid`` points.
    Two Richardson extrapolations (coarse pair and fine pair) remove the
    ``h^2`` error; their difference is the reported drift, and a drift above
    ``tol`` raises :class:`OracleError`.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    Q = default_box(p.a, beta) if Q is None else float(Q)
    cache_path = None
    if cache_dir is not None and p.name != "custom" and o.name != "custom":
        cache_path = os.path.join(cache_dir, f"oracle-{_cache_key(p, o, beta, n_grid, Q)}.json")
        if os.path.exists(cache_path):
            with open(cache_path) as fh:
                return ExactReference(**json.load(fh))

    sizes = (n_grid // 2, n_grid, 2 * n_grid)
    vals, hs, logzs = [], [], []
    for n in sizes:
        v, lz, h = _thermal_on_grid(p, o, beta, n, Q)
        vals.append(v)
        hs.append(h)
        logzs.append(lz)
    r_lo = _richardson(vals[0], hs[0], vals[1], hs[1])
    r_hi = _richardson(vals[1], hs[1], vals[2], hs[2])
    drift = abs(r_hi - r_lo)
    if drift > tol:
        raise OracleError(f"oracle not converged: Richardson drift {drift:.3e} > {tol:.1e}", drift)
    ref = ExactReference(
        beta=float(beta),
        potential=p.describe(),
        observable=o.name,
        value=float(r_hi),
        log_Z=float(_richardson(logzs[1], hs[1], logzs[2], hs[2])),
        n_grid=int(n_grid),
        Q=float(Q),
        drift=float(drift),
        levels={str(n): v for n, v in zip(sizes, vals)},
    )
    if cache_path is not None:
        os.makedirs(cache_dir, exist_ok=True)
        with open(cache_path, "w") as fh:
            json.dump(asdict(ref), fh, indent=2)
    return ref


def trotter_trace(
    p: PotentialSpec,
    o: ObservableSpec,
    beta: float,
    D: int,
    n_grid: int = 1024,
    Q: float | None = None,
) -> float:
    """``Tr[(G W)^D O] / Tr[(G W)^D]`` on a grid, ``G`` the heat kernel for
    ``beta/D`` and ``W = diag(exp(-beta/D V))``.

    This is the std-PIR average with ``D`` beads, computed without sampling.
    ``G W`` is similar to the symmetric ``W^1/2 G W^1/2``, whose eigenvalues
    are rescaled by the largest before raising to the power ``D``.
    """
    if p.dim != 1:
        raise ValueError("trotter_trace is one-dimensional")
    if D < 1:
        raise ValueError("D must be positive")
    Q = default_box(p.a, beta) if Q is None else float(Q)
    q = np.linspace(-Q, Q, n_grid)
    h = q[1] - q[0]
    bD = beta / D
    G = h * heat_kernel(q[:, None, None], q[None, :, None], bD)
    sw = np.exp(-0.5 * bD * p.eval(q[:, None]))
    S = sw[:, None] * G * sw[None, :]
    lam, U = eigh(S)
    lam = np.clip(lam / lam[-1], 0.0, None)
    pw = lam**D
    dens = (U * U) @ pw
    dens /= dens.sum()
    mass = _boundary_mass(dens, q, Q)
    if mass > _BOUNDARY_MASS_TOL:
        raise OracleError(f"ring-polymer density leaks to the box edge (mass {mass:.2e}); increase Q")
    return float(dens @ o.eval(q[:, None]))


def mehler_diagonal_average(o: ObservableSpec, beta: float, a: float, n_quad: int = 4001, Q: float | None = None) -> float:
    """Harmonic thermal average from the Mehler diagonal ``K_beta(q, q)`` alone."""
    Q = default_box(a, beta) if Q is None else float(Q)
    q = np.linspace(-Q, Q, n_quad)
    logk = mehler_kernel(q[:, None], q[:, None], beta, a, log=True)
    w = np.exp(logk - logk.max())
    return float(np.sum(w * o.eval(q[:, None])) / np.sum(w))
