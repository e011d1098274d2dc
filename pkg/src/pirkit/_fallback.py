"""Pure-numpy versions of the compiled kernels.

Used when the extension is not built, when ``PIRKIT_BACKEND=python`` is set,
and for any potential or observable outside the catalog. The arithmetic
mirrors ``_kernels.pyx`` step for step; results agree to rounding.
"""

from __future__ import annotations

import numpy as np


def grid_reduce(x, p, o):
    """Row sums of ``V^a`` and ``O`` over the middle axis of ``x`` (n, m, d)."""
    return p.va(x).sum(axis=1), o.eval(x).sum(axis=1)


def _state(C, xi, stiff, beta_D, p, o):
    x = C @ xi
    va = p.va(x)
    g = stiff[:, None] * xi + beta_D * (C.T @ p.va_grad(x))
    energy = beta_D * va.sum() + 0.5 * np.sum(stiff[:, None] * xi * xi)
    return energy, g, float(np.mean(o.eval(x)))


def langevin_block(xi, C, stiff, beta_D, p, o, h, noise, log_u, metropolis, out_obs, out_energy):
    mass = (1.0 / stiff)[:, None]
    scale = np.sqrt(2.0 * h * mass)
    e0, g0, o0 = _state(C, xi, stiff, beta_D, p, o)
    n_accept = 0
    for s in range(noise.shape[0]):
        xp = xi - h * mass * g0 + scale * noise[s]
        e1, g1, o1 = _state(C, xp, stiff, beta_D, p, o)
        if not np.isfinite(e1):
            return n_accept, s
        if metropolis:
            t = xp - xi + h * mass * g0
            fwd = np.sum(stiff[:, None] * t * t)
            t = xi - xp + h * mass * g1
            bwd = np.sum(stiff[:, None] * t * t)
            log_alpha = e0 - e1 + (fwd - bwd) / (4.0 * h)
        else:
            log_alpha = 1.0
        if log_u[s] < log_alpha:
            n_accept += 1
            xi[...] = xp
            g0, e0, o0 = g1, e1, o1
        out_obs[s] = o0
        out_energy[s] = e0
    return n_accept, -1
