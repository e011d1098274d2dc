"""Kernel dispatch: compiled extension when importable, numpy otherwise.

Set ``PIRKIT_BACKEND=python`` to force the fallback. Potentials or
observables without a ``kernel_code`` always take the numpy path.
"""

from __future__ import annotations

import os

import numpy as np

from . import _fallback

try:
    if os.environ.get("PIRKIT_BACKEND", "").lower() == "python":
        raise ImportError("fallback forced by PIRKIT_BACKEND")
    from . import _kernels
except ImportError:
    _kernels = None

BACKEND = "cython" if _kernels is not None else "python"

__all__ = ["BACKEND", "grid_reduce", "langevin_block", "compiled_available"]


def compiled_available() -> bool:
    return _kernels is not None


def _use_compiled(p, o, backend: str | None) -> bool:
    if backend == "python":
        return False
    ok = _kernels is not None and p.kernel_code is not None and o.kernel_code is not None
    if backend == "cython" and not ok:
        raise RuntimeError("compiled kernels unavailable for this backend/potential combination")
    return ok


def grid_reduce(x: np.ndarray, p, o, backend: str | None = None):
    """Per-row sums of ``V^a`` and ``O`` over grid values ``x`` of shape (n, m, d)."""
    if _use_compiled(p, o, backend):
        x = np.ascontiguousarray(x, dtype=float)
        sva = np.empty(x.shape[0])
        so = np.empty(x.shape[0])
        _kernels.grid_reduce(x, p.kernel_code, np.asarray(p.kernel_params, dtype=float), p.a, o.kernel_code, sva, so)
        return sva, so
    return _fallback.grid_reduce(x, p, o)


def langevin_block(xi, C, stiff, beta_D, p, o, h, noise, log_u, metropolis, out_obs, out_energy, backend=None):
    """Advance the mode state ``xi`` in place; returns ``(n_accept, failed_step)``."""
    if _use_compiled(p, o, backend):
        return _kernels.langevin_block(
            xi, np.ascontiguousarray(C), np.ascontiguousarray(stiff), float(beta_D),
            p.kernel_code, np.asarray(p.kernel_params, dtype=float), p.a, o.kernel_code, float(h),
            np.ascontiguousarray(noise), np.ascontiguousarray(log_u), bool(metropolis), out_obs, out_energy,
        )
    return _fallback.langevin_block(xi, C, stiff, beta_D, p, o, h, noise, log_u, metropolis, out_obs, out_energy)
