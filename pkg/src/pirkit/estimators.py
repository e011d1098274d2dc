"""Monte Carlo estimators for the three path-integral representations.

* ``sample_std``: preconditioned (optionally Metropolis-adjusted) overdamped
  Langevin chains targeting the ring-polymer density ``exp(-E_D^std)``.
* ``estimate_cl_truncated`` / ``estimate_cl_discretized``: self-normalised
  importance sampling with i.i.d. loops from the Gaussian measure ``nu``.
  Weights are ``A = exp(-int V^a)`` and the scored quantity is the
  time-averaged observable ``B``.

All randomness comes from :mod:`pirkit.rng`, in fixed-size blocks, so results
depend only on the seed and never on the thread count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import backend, rng
from .potentials import ObservableSpec, PotentialSpec
from .spectral import (
    NormalModeLoop,
    RingPolymer,
    c0_constant,
    discrete_basis,
    discrete_frequencies,
    mode_values,
    modes_to_grid,
    nu_block,
)

__all__ = [
    "ABStatistics",
    "EstimatorError",
    "EstimatorResult",
    "SamplerError",
    "ab_samples",
    "estimate_cl_discretized",
    "estimate_cl_truncated",
    "paired_difference",
    "quadrature_va",
    "riemann_va",
    "sample_std",
    "std_energy",
    "std_energy_grad",
    "std_energy_modes",
]

BLOCK = 4096  # loops per random block; part of the reproducibility contract
CHUNK = 4096  # Langevin steps per random block


class EstimatorError(RuntimeError):
    pass


class SamplerError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class EstimatorResult:
    estimate: float
    std_error: float
    n_samples: int
    ess: float
    seed: int
    representation: str
    wall_time: float
    ess_warning: bool = False
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ABStatistics:
    """Per-sample weights ``A = exp(log_A)`` and scores ``B`` for one level."""

    log_A: np.ndarray
    B: np.ndarray

    @property
    def n(self) -> int:
        return self.log_A.size

    def _scaled(self):
        m = self.log_A.max()
        if not np.isfinite(m):
            return 0.0, np.zeros_like(self.log_A)
        return math.exp(m), np.exp(self.log_A - m)

    @property
    def mean_A(self) -> float:
        s, w = self._scaled()
        return float(s * np.mean(w))

    @property
    def mean_B(self) -> float:
        return float(np.mean(self.B))

    @property
    def mean_AB(self) -> float:
        s, w = self._scaled()
        return float(s * np.mean(w * self.B))

    @property
    def se_A(self) -> float:
        s, w = self._scaled()
        return float(s * np.std(w, ddof=1) / math.sqrt(self.n))

    def max_log_A(self) -> float:
        return float(self.log_A.max())

    def max_abs_B(self) -> float:
        return float(np.abs(self.B).max())

    def violations(self, beta: float, M1: float, M2: float, tol: float = 1e-12) -> dict:
        """Counts of samples breaking ``A <= exp(beta M1)`` and ``|B| <= M2``."""
        return {
            "A": int(np.sum(self.log_A > beta * M1 + tol)),
            "B": int(np.sum(np.abs(self.B) > M2 + tol)),
        }

    def differences(self, ref: ABStatistics) -> dict:
        """Paired comparison against ``ref`` drawn from the same loops."""
        if ref.n != self.n:
            raise ValueError("reference statistics must come from the same samples")
        dA = np.abs(np.exp(self.log_A) - np.exp(ref.log_A))
        dB = np.abs(self.B - ref.B)
        dAB = np.abs(np.exp(self.log_A) * self.B - np.exp(ref.log_A) * ref.B)
        diff, se = paired_difference(self.log_A, self.B, ref.log_A, ref.B)
        root_n = math.sqrt(self.n)
        return {
            "mean_abs_dA": float(dA.mean()),
            "se_abs_dA": float(dA.std(ddof=1) / root_n),
            "mean_abs_dB": float(dB.mean()),
            "se_abs_dB": float(dB.std(ddof=1) / root_n),
            "mean_abs_dAB": float(dAB.mean()),
            "estimate_diff": diff,
            "estimate_diff_se": se,
        }


# --- ring-polymer energy ------------------------------------------------------


def std_energy(rp: RingPolymer, p: PotentialSpec) -> float:
    """``1/(2 beta_D) sum |x_j - x_{j+1}|^2 + beta_D sum V(x_j)``, cyclic in j."""
    if rp.dim != p.dim:
        raise ValueError("ring polymer and potential dimensions differ")
    x = rp.x
    dx = x - np.roll(x, -1, axis=0)
    return float(np.sum(dx * dx) / (2.0 * rp.beta_D) + rp.beta_D * np.sum(p.eval(x)))


def std_energy_grad(rp: RingPolymer, p: PotentialSpec) -> np.ndarray:
    x = rp.x
    lap = 2.0 * x - np.roll(x, 1, axis=0) - np.roll(x, -1, axis=0)
    return lap / rp.beta_D + rp.beta_D * p.grad(x)


def std_energy_modes(loop: NormalModeLoop, p: PotentialSpec) -> float:
    """Ring-polymer energy written in ``N = D`` normal modes:
    ``1/2 sum (omega_{k,D}^2 + a^2) |xi_k|^2 + beta_D sum V^a(x_j)``."""
    beta, D = loop.basis.beta, loop.basis.N
    w = discrete_frequencies(beta, D)
    rp = modes_to_grid(loop, D)
    spring = 0.5 * np.sum((w * w + p.a**2)[:, None] * loop.xi**2)
    return float(spring + rp.beta_D * np.sum(p.va(rp.x)))


# --- quadratures of V^a along a loop ------------------------------------------


def _loop_at(loop: NormalModeLoop, taus: np.ndarray) -> np.ndarray:
    return mode_values(loop.basis.beta, loop.basis.N, taus).T @ loop.xi


def default_n_quad(N: int) -> int:
    return max(4 * N, 128)


def quadrature_va(loop: NormalModeLoop, p: PotentialSpec, n_quad: int | None = None, with_error: bool = False):
    """``int_0^beta V^a(x_N(tau)) dtau`` by the composite midpoint rule.

    The integrand is smooth and periodic, so the rule converges
    spectrally once ``n_quad`` resolves the top mode. The error estimate is
    the gap to the left-endpoint rule on the same number of nodes.
    """
    N = loop.basis.N
    n_quad = default_n_quad(N) if n_quad is None else n_quad
    if n_quad < 4 * N:
        raise ValueError(f"n_quad={n_quad} under-resolves N={N} modes (need >= {4 * N})")
    beta = loop.basis.beta
    step = beta / n_quad
    mid = step * np.sum(p.va(_loop_at(loop, (np.arange(n_quad) + 0.5) * step)))
    if not with_error:
        return float(mid)
    left = step * np.sum(p.va(_loop_at(loop, np.arange(n_quad) * step)))
    return float(mid), float(abs(mid - left))


def riemann_va(loop: NormalModeLoop, p: PotentialSpec, D: int) -> float:
    """Left Riemann sum ``beta_D sum_j V^a(x_N(j beta_D))``; any ``D >= 1``."""
    if D < 1:
        raise ValueError("D must be positive")
    beta_D = loop.basis.beta / D
    return float(beta_D * np.sum(p.va(_loop_at(loop, np.arange(D) * beta_D))))


# --- importance sampling under nu ---------------------------------------------


def _block_counts(n: int):
    nblocks = -(-n // BLOCK)
    return [(b, min(BLOCK, n - b * BLOCK)) for b in range(nblocks)]


def ab_samples(
    p: PotentialSpec,
    o: ObservableSpec,
    beta: float,
    N: int,
    n_samples: int,
    seed: int,
    D: int | None = None,
    n_quad: int | None = None,
    threads: int = 1,
    backend_name: str | None = None,
) -> ABStatistics:
    """Per-loop ``log A`` and ``B`` for ``n_samples`` draws from ``nu``.

    With ``D`` given, the left Riemann sum on ``D`` points (the discretised
    representation); otherwise the midpoint rule on ``n_quad`` nodes. The
    observable is averaged on the same nodes as ``V^a``. Loops for a given
    seed are identical across ``N``, ``D`` and ``n_quad``.
    """
    if p.dim != o.dim:
        raise ValueError("potential and observable dimensions differ")
    d = p.dim
    if D is None:
        m = default_n_quad(N) if n_quad is None else n_quad
        if m < 4 * N:
            raise ValueError(f"n_quad={m} under-resolves N={N} modes (need >= {4 * N})")
        nodes = (np.arange(m) + 0.5) * (beta / m)
    else:
        if D < 1:
            raise ValueError("D must be positive")
        m = D
        nodes = np.arange(D) * (beta / D)
    Cq = mode_values(beta, N, nodes)  # (N, m)

    def run(block):
        b, nb = block
        z = nu_block(beta, N, d, p.a, nb, seed, b)
        x = np.ascontiguousarray(np.tensordot(z, Cq, axes=([1], [0])).transpose(0, 2, 1))
        sva, so = backend.grid_reduce(x, p, o, backend_name)
        return -(beta / m) * sva, so / m

    blocks = _block_counts(n_samples)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    return ABStatistics(np.concatenate([q[0] for q in parts]), np.concatenate([q[1] for q in parts]))


def _self_normalised(log_A: np.ndarray, B: np.ndarray):
    top = log_A.max()
    if not np.isfinite(top):
        raise EstimatorError("all importance weights underflowed or are not finite")
    w = np.exp(log_A - top)
    sw = np.sum(w)
    est = np.sum(w * B) / sw
    wn = w / sw
    se = math.sqrt(float(np.sum(wn * wn * (B - est) ** 2)))
    ess = float(sw * sw / np.sum(w * w))
    return float(est), se, ess, wn


def paired_difference(log_A1, B1, log_A2, B2):
    """Difference of two self-normalised estimates on the same loops and its
    delta-method standard error."""
    e1, _, _, w1 = _self_normalised(np.asarray(log_A1), np.asarray(B1))
    e2, _, _, w2 = _self_normalised(np.asarray(log_A2), np.asarray(B2))
    infl = w1 * (B1 - e1) - w2 * (B2 - e2)
    return e1 - e2, math.sqrt(float(np.sum(infl * infl)))


def _cl_result(stats, seed, tag, t0, ess_floor, extra):
    est, se, ess, _ = _self_normalised(stats.log_A, stats.B)
    n = stats.n
    return EstimatorResult(
        estimate=est,
        std_error=se,
        n_samples=n,
        ess=ess,
        seed=int(seed),
        representation=tag,
        wall_time=time.perf_counter() - t0,
        ess_warning=bool(ess < ess_floor * n),
        diagnostics=extra,
    )


def _check_cl_inputs(p, beta, N, n_samples):
    if not beta > 0:
        raise ValueError("beta must be positive")
    if N < 1:
        raise ValueError("N must be positive")
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")


def estimate_cl_truncated(
    p: PotentialSpec,
    o: ObservableSpec,
    beta: float,
    N: int,
    n_samples: int,
    seed: int = 0,
    n_quad: int | None = None,
    threads: int = 1,
    ess_floor: float = 0.05,
    backend_name: str | None = None,
):
    """Truncated continuous-loop average ``E[A_N B_N] / E[A_N]``.

    Returns ``(EstimatorResult, ABStatistics)``. ``ess_warning`` is set when
    the effective sample size drops below ``ess_floor * n_samples``.
    """
    _check_cl_inputs(p, beta, N, n_samples)
    t0 = time.perf_counter()
    m = default_n_quad(N) if n_quad is None else n_quad
    stats = ab_samples(p, o, beta, N, n_samples, seed, n_quad=m, threads=threads, backend_name=backend_name)
    extra = {
        "n_quad": m,
        "mean_A": stats.mean_A,
        "partition_floor": math.exp(-1.5 * beta * p.M1 - c0_constant(p.dim, beta, p.a) * p.M1),
    }
    return _cl_result(stats, seed, f"cl(N={N})", t0, ess_floor, extra), stats


def estimate_cl_discretized(
    p: PotentialSpec,
    o: ObservableSpec,
    beta: float,
    N: int,
    D: int,
    n_samples: int,
    seed: int = 0,
    threads: int = 1,
    ess_floor: float = 0.05,
    backend_name: str | None = None,
):
    """Discretised truncated continuous-loop average ``E[A_{N,D} B_{N,D}] / E[A_{N,D}]``."""
    _check_cl_inputs(p, beta, N, n_samples)
    if D < 1:
        raise ValueError("D must be positive")
    t0 = time.perf_counter()
    stats = ab_samples(p, o, beta, N, n_samples, seed, D=D, threads=threads, backend_name=backend_name)
    extra = {"D": D, "mean_A": stats.mean_A}
    return _cl_result(stats, seed, f"cl(N={N},D={D})", t0, ess_floor, extra), stats


# --- ring-polymer Langevin ------------------------------------------------------


def _run_chain(chain, seed, n_steps, C, stiff, beta_D, p, o, h, metropolis, energy_threshold, backend_name):
    D, d = C.shape[0], p.dim
    g0 = rng.stream(seed, chain, 0, rng.LANE_START)
    xi = np.ascontiguousarray(g0.standard_normal((D, d)) / np.sqrt(stiff)[:, None])
    obs = np.empty(n_steps)
    energy = np.empty(n_steps)
    n_accept = 0
    for b in range(-(-n_steps // CHUNK)):
        lo = b * CHUNK
        nb = min(CHUNK, n_steps - lo)
        noise = rng.stream(seed, chain, b, rng.LANE_LANGEVIN).standard_normal((nb, D, d))
        log_u = np.log(rng.stream(seed, chain, b, rng.LANE_ACCEPT).random(nb))
        acc, failed = backend.langevin_block(
            xi, C, stiff, beta_D, p, o, h, noise, log_u, metropolis,
            obs[lo:lo + nb], energy[lo:lo + nb], backend=backend_name,
        )
        n_accept += acc
        if failed >= 0 or np.max(energy[lo:lo + nb]) > energy_threshold:
            step = lo + (failed if failed >= 0 else int(np.argmax(energy[lo:lo + nb])))
            raise SamplerError(
                f"Langevin chain {chain} diverged at step {step}",
                {"chain": chain, "step": step, "step_h": h, "last_energy": float(energy[max(step - 1, 0)])},
            )
    return obs, energy, n_accept


def sample_std(
    p: PotentialSpec,
    o: ObservableSpec,
    beta: float,
    D: int,
    n_steps: int,
    step_h: float = 0.2,
    seed: int = 0,
    n_chains: int = 4,
    burn_in: float = 0.1,
    metropolis: bool = True,
    n_batches: int = 25,
    threads: int = 1,
    energy_threshold: float = 1e8,
    backend_name: str | None = None,
) -> EstimatorResult:
    """Ring-polymer average ``<(1/D) sum_j O(x_j)>`` under ``exp(-E_D^std)``.

    The chain runs in ring-polymer normal modes with mass
    ``1/(omega_{k,D}^2 + a^2)``, which whitens the free ring polymer; the
    target does not depend on ``a``. ``n_steps`` is per chain. The standard
    error comes from batch means over all chains.
    """
    if D < 1 or n_steps < 1 or n_chains < 1:
        raise ValueError("D, n_steps and n_chains must be positive")
    if not 0 < step_h:
        raise ValueError("step_h must be positive")
    if not 0 <= burn_in < 1:
        raise ValueError("burn_in must be a fraction in [0, 1)")
    t0 = time.perf_counter()
    C = np.ascontiguousarray(discrete_basis(beta, D))
    stiff = discrete_frequencies(beta, D) ** 2 + p.a**2
    beta_D = beta / D
    args = (seed, n_steps, C, stiff, beta_D, p, o, step_h, metropolis, energy_threshold, backend_name)
    if threads > 1 and n_chains > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(lambda c: _run_chain(c, *args), range(n_chains)))
    else:
        runs = [_run_chain(c, *args) for c in range(n_chains)]
    start = int(burn_in * n_steps)
    kept = [r[0][start:] for r in runs]
    n_kept = kept[0].size
    nb = min(n_batches, n_kept)
    bl = n_kept // nb
    means = np.concatenate([k[n_kept - nb * bl:].reshape(nb, bl).mean(axis=1) for k in kept])
    allv = np.concatenate(kept)
    est = float(np.mean(means)) if bl * nb == n_kept else float(np.mean(allv))
    se = float(np.std(means, ddof=1) / math.sqrt(means.size)) if means.size > 1 else 0.0
    var = float(np.var(allv))
    ess = float(allv.size) if se == 0.0 else min(float(allv.size), var / se**2)
    acc = sum(r[2] for r in runs) / (n_chains * n_steps)
    return EstimatorResult(
        estimate=est,
        std_error=se,
        n_samples=int(allv.size),
        ess=ess,
        seed=int(seed),
        representation=f"std(D={D})",
        wall_time=time.perf_counter() - t0,
        diagnostics={
            "acceptance": acc,
            "step_h": step_h,
            "metropolis": bool(metropolis),
            "n_chains": n_chains,
            "mean_energy": float(np.mean(np.concatenate([r[1][start:] for r in runs]))),
        },
    )
