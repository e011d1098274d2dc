# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: fused V^a/O grid reduction and the preconditioned
Langevin chain for the std-PIR. Catalog potentials/observables only; codes
must match ``pirkit.potentials``."""

from libc.math cimport cos, sin, tanh, sqrt, isfinite

import numpy as np

cdef enum:
    POT_HARMONIC = 0
    POT_BUMPED = 1
    POT_QUARTIC = 2

cdef enum:
    OBS_ONE = 0
    OBS_Q = 1
    OBS_Q2 = 2
    OBS_TANH = 3
    OBS_TANH2 = 4


cdef inline double _va(int code, const double* q, Py_ssize_t d, const double* par, double a2) noexcept nogil:
    cdef Py_ssize_t i
    cdef double r2 = 0.0, s = 0.0
    for i in range(d):
        r2 += q[i] * q[i]
        s += q[i]
    if code == POT_HARMONIC:
        return 0.5 * (par[0] - a2) * r2
    elif code == POT_BUMPED:
        return 0.5 * (par[0] - a2) * r2 + par[1] * cos(par[2] * s)
    else:
        return par[0] * r2 * r2 - 0.5 * a2 * r2


cdef inline void _va_grad(int code, const double* q, Py_ssize_t d, const double* par, double a2, double* g) noexcept nogil:
    cdef Py_ssize_t i
    cdef double r2 = 0.0, s = 0.0, f
    for i in range(d):
        r2 += q[i] * q[i]
        s += q[i]
    if code == POT_HARMONIC:
        for i in range(d):
            g[i] = (par[0] - a2) * q[i]
    elif code == POT_BUMPED:
        f = -par[1] * par[2] * sin(par[2] * s)
        for i in range(d):
            g[i] = (par[0] - a2) * q[i] + f
    else:
        for i in range(d):
            g[i] = (4.0 * par[0] * r2 - a2) * q[i]


cdef inline double _obs(int code, const double* q, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i
    cdef double r2 = 0.0, t
    if code == OBS_ONE:
        return 1.0
    elif code == OBS_Q:
        return q[0]
    elif code == OBS_Q2:
        for i in range(d):
            r2 += q[i] * q[i]
        return r2
    elif code == OBS_TANH:
        return tanh(q[0])
    else:
        t = tanh(q[0])
        return t * t


def grid_reduce(const double[:, :, ::1] x, int pot_code, const double[::1] pot_par, double a,
                int obs_code, double[::1] out_va, double[::1] out_obs):
    """Row sums ``sum_j V^a(x[i, j])`` and ``sum_j O(x[i, j])``."""
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], d = x.shape[2]
    cdef Py_ssize_t i, j
    cdef double sv, so, a2 = a * a
    with nogil:
        for i in range(n):
            sv = 0.0
            so = 0.0
            for j in range(m):
                sv += _va(pot_code, &x[i, j, 0], d, &pot_par[0], a2)
                so += _obs(obs_code, &x[i, j, 0], d)
            out_va[i] = sv
            out_obs[i] = so


cdef void _state(const double[:, ::1] C, const double[:, ::1] xi, double[:, ::1] x, double[:, ::1] gx,
                 double[:, ::1] g, const double[::1] stiff, double beta_D, int pot_code,
                 const double* par, double a2, double* energy, double* obs_mean, int obs_code) noexcept nogil:
    """x = C xi; energy, its gradient in mode coordinates, and the bead-averaged observable."""
    cdef Py_ssize_t D = C.shape[0], d = xi.shape[1]
    cdef Py_ssize_t j, k, c
    cdef double acc, e = 0.0, so = 0.0
    for j in range(D):
        for c in range(d):
            acc = 0.0
            for k in range(D):
                acc += C[j, k] * xi[k, c]
            x[j, c] = acc
    for j in range(D):
        e += beta_D * _va(pot_code, &x[j, 0], d, par, a2)
        so += _obs(obs_code, &x[j, 0], d)
        _va_grad(pot_code, &x[j, 0], d, par, a2, &gx[j, 0])
    for k in range(D):
        for c in range(d):
            acc = 0.0
            for j in range(D):
                acc += C[j, k] * gx[j, c]
            g[k, c] = stiff[k] * xi[k, c] + beta_D * acc
            e += 0.5 * stiff[k] * xi[k, c] * xi[k, c]
    energy[0] = e
    obs_mean[0] = so / D


def langevin_block(double[:, ::1] xi, const double[:, ::1] C, const double[::1] stiff, double beta_D,
                   int pot_code, const double[::1] pot_par, double a, int obs_code, double h,
                   const double[:, :, ::1] noise, const double[::1] log_u, bint metropolis,
                   double[::1] out_obs, double[::1] out_energy):
    """Advance ``xi`` in place by ``noise.shape[0]`` steps.

    Preconditioned Euler-Maruyama with mass ``1/stiff`` in mode coordinates,
    optionally Metropolis-adjusted. Returns ``(n_accept, failed_step)``;
    ``failed_step`` is -1 unless the energy stopped being finite.
    """
    cdef Py_ssize_t D = xi.shape[0], d = xi.shape[1], n_steps = noise.shape[0]
    cdef Py_ssize_t s, k, c
    cdef double a2 = a * a
    cdef double e0, e1, o0, o1, log_alpha, fwd, bwd, t
    cdef long n_accept = 0, failed = -1
    x = np.empty((D, d))
    gx = np.empty((D, d))
    g0 = np.empty((D, d))
    g1 = np.empty((D, d))
    xp = np.empty((D, d))
    cdef double[:, ::1] xv = x, gxv = gx, g0v = g0, g1v = g1, xpv = xp
    cdef double[::1] mass = 1.0 / np.asarray(stiff)
    with nogil:
        _state(C, xi, xv, gxv, g0v, stiff, beta_D, pot_code, &pot_par[0], a2, &e0, &o0, obs_code)
        for s in range(n_steps):
            for k in range(D):
                for c in range(d):
                    xpv[k, c] = xi[k, c] - h * mass[k] * g0v[k, c] + sqrt(2.0 * h * mass[k]) * noise[s, k, c]
            _state(C, xpv, xv, gxv, g1v, stiff, beta_D, pot_code, &pot_par[0], a2, &e1, &o1, obs_code)
            if not isfinite(e1):
                failed = s
                break
            if metropolis:
                fwd = 0.0
                bwd = 0.0
                for k in range(D):
                    for c in range(d):
                        t = xpv[k, c] - xi[k, c] + h * mass[k] * g0v[k, c]
                        fwd += stiff[k] * t * t
                        t = xi[k, c] - xpv[k, c] + h * mass[k] * g1v[k, c]
                        bwd += stiff[k] * t * t
                log_alpha = e0 - e1 + (fwd - bwd) / (4.0 * h)
            else:
                log_alpha = 1.0
            if log_u[s] < log_alpha:
                n_accept += 1
                for k in range(D):
                    for c in range(d):
                        xi[k, c] = xpv[k, c]
                        g0v[k, c] = g1v[k, c]
                e0 = e1
                o0 = o1
            out_obs[s] = o0
            out_energy[s] = e0
    return n_accept, failed
