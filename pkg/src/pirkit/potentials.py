"""Potentials, observables and the harmonic split ``V^a = V - a^2 |q|^2 / 2``.

All callables are vectorised over leading axes: ``eval`` maps an array of
shape ``(..., d)`` to ``(...)`` and ``grad`` maps ``(..., d)`` to ``(..., d)``.
Catalog entries also carry a small integer ``kernel_code`` so the compiled
kernels can evaluate them without calling back into Python.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import rng

__all__ = [
    "AssumptionError",
    "CheckReport",
    "ObservableSpec",
    "PotentialSpec",
    "check_assumptions",
    "harmonic",
    "make_observable",
    "make_potential",
    "observable",
    "quartic",
    "soft_bumped",
    "va_eval",
    "va_grad",
]

Array = np.ndarray

# kernel codes shared with _kernels.pyx
POT_HARMONIC = 0
POT_BUMPED = 1
POT_QUARTIC = 2

OBS_ONE = 0
OBS_Q = 1
OBS_Q2 = 2
OBS_TANH = 3
OBS_TANH2 = 4


class AssumptionError(ValueError):
    """Raised in strict mode when a potential or observable fails its checks."""


@dataclass(frozen=True)
class PotentialSpec:
    dim: int
    eval: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    a: float
    M1: float
    name: str = "custom"
    params: Mapping[str, object] = field(default_factory=dict)
    kernel_code: int | None = None
    kernel_params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not self.a > 0:
            raise ValueError(f"splitting parameter a must be positive, got {self.a}")
        if not self.M1 > 0:
            raise ValueError(f"M1 must be positive, got {self.M1}")

    def va(self, q: Array) -> Array:
        q = np.asarray(q, dtype=float)
        return self.eval(q) - 0.5 * self.a**2 * np.sum(q * q, axis=-1)

    def va_grad(self, q: Array) -> Array:
        q = np.asarray(q, dtype=float)
        return self.grad(q) - self.a**2 * q

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim, "a": self.a, "M1": self.M1, **dict(self.params)}


@dataclass(frozen=True)
class ObservableSpec:
    dim: int
    eval: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    M2: float
    name: str = "custom"
    params: Mapping[str, object] = field(default_factory=dict)
    kernel_code: int | None = None
    kernel_params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not self.M2 > 0:
            raise ValueError(f"M2 must be positive, got {self.M2}")

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim, "M2": self.M2, **dict(self.params)}


def _check_point(dim: int, q) -> Array:
    q = np.asarray(q, dtype=float)
    if q.ndim == 0:
        q = q.reshape(1)
    if q.shape[-1] != dim:
        raise ValueError(f"point has dimension {q.shape[-1]}, expected {dim}")
    return q


def va_eval(p: PotentialSpec, q) -> float | Array:
    """Shifted potential ``V(q) - a^2 |q|^2 / 2``."""
    q = _check_point(p.dim, q)
    out = p.va(q)
    return float(out) if np.ndim(out) == 0 else out


def va_grad(p: PotentialSpec, q) -> Array:
    q = _check_point(p.dim, q)
    return p.va_grad(q)


# --- catalog -----------------------------------------------------------------


def harmonic(omega: float = 1.0, a: float | None = None, M1: float = 1.0, dim: int = 1) -> PotentialSpec:
    """``V = omega^2 |q|^2 / 2``; satisfies the assumptions when ``a <= omega``
    and ``M1 >= omega^2 - a^2``."""
    a = omega if a is None else a
    w2 = float(omega) ** 2

    def V(q):
        return 0.5 * w2 * np.sum(q * q, axis=-1)

    def dV(q):
        return w2 * q

    return PotentialSpec(
        dim, V, dV, float(a), float(M1), "harmonic", {"omega": float(omega)},
        POT_HARMONIC, (w2, 0.0, 0.0),
    )


def soft_bumped(
    omega: float = 1.0,
    c: float = 0.2,
    k: float | tuple[float, ...] = 2.0,
    a: float | None = None,
    M1: float | None = None,
    dim: int = 1,
) -> PotentialSpec:
    """``V = omega^2 |q|^2 / 2 + c cos(k . q)``.

    With ``a = omega`` the shifted potential is the bounded bump alone, and
    ``M1 = max(|c|, |c| |k|)`` certifies the assumptions. The default ``M1``
    is that value plus ``omega^2 - a^2`` when ``a < omega``.
    """
    a = omega if a is None else a
    kvec = np.broadcast_to(np.asarray(k, dtype=float), (dim,)).copy()
    knorm = float(np.linalg.norm(kvec))
    if M1 is None:
        M1 = max(abs(c), abs(c) * knorm) + max(omega**2 - a**2, 0.0)
    w2 = float(omega) ** 2

    def V(q):
        return 0.5 * w2 * np.sum(q * q, axis=-1) + c * np.cos(q @ kvec)

    def dV(q):
        return w2 * q - c * np.sin(q @ kvec)[..., None] * kvec

    params = {"omega": float(omega), "c": float(c), "k": kvec.tolist() if dim > 1 else float(kvec[0])}
    # compiled kernel handles a scalar wave number acting on every component
    code = POT_BUMPED if np.all(kvec == kvec[0]) else None
    return PotentialSpec(dim, V, dV, float(a), float(M1), "soft_bumped", params, code, (w2, float(c), float(kvec[0])))


def quartic(coef: float = 1.0, a: float = 1.0, M1: float = 10.0, dim: int = 1) -> PotentialSpec:
    """``V = coef |q|^4``. Its gradient grows cubically, so no finite ``M1``
    satisfies the gradient bound on every ball; kept for negative tests."""

    def V(q):
        r2 = np.sum(q * q, axis=-1)
        return coef * r2 * r2

    def dV(q):
        return 4.0 * coef * np.sum(q * q, axis=-1)[..., None] * q

    return PotentialSpec(dim, V, dV, float(a), float(M1), "quartic", {"coef": float(coef)}, POT_QUARTIC, (float(coef), 0.0, 0.0))


def observable(name: str, dim: int = 1, M2: float | None = None) -> ObservableSpec:
    """Catalog observables. Scalar ones act on the first coordinate.

    ``one``, ``tanh`` and ``tanh2`` satisfy ``max(|O|, |grad O|) <= 1``;
    ``q`` and ``q2`` are unbounded and only useful with the exact oracles.
    """
    if name == "one":
        def O(q):
            return np.ones(q.shape[:-1])

        def dO(q):
            return np.zeros_like(q)
        code, default_m2 = OBS_ONE, 1.0
    elif name == "q":
        def O(q):
            return q[..., 0].copy()

        def dO(q):
            g = np.zeros_like(q)
            g[..., 0] = 1.0
            return g
        code, default_m2 = OBS_Q, 1.0
    elif name == "q2":
        def O(q):
            return np.sum(q * q, axis=-1)

        def dO(q):
            return 2.0 * q
        code, default_m2 = OBS_Q2, 1.0
    elif name == "tanh":
        def O(q):
            return np.tanh(q[..., 0])

        def dO(q):
            g = np.zeros_like(q)
            g[..., 0] = 1.0 / np.cosh(q[..., 0]) ** 2
            return g
        code, default_m2 = OBS_TANH, 1.0
    elif name == "tanh2":
        def O(q):
            return np.tanh(q[..., 0]) ** 2

        def dO(q):
            g = np.zeros_like(q)
            t = np.tanh(q[..., 0])
            g[..., 0] = 2.0 * t * (1.0 - t * t)
            return g
        code, default_m2 = OBS_TANH2, 1.0
    else:
        raise ValueError(f"unknown observable {name!r}")
    return ObservableSpec(dim, O, dO, float(default_m2 if M2 is None else M2), name, {}, code, ())


_POTENTIALS = {"harmonic": harmonic, "soft_bumped": soft_bumped, "quartic": quartic}


def make_potential(name: str, params: Mapping | None = None, *, a=None, M1=None, dim: int = 1) -> PotentialSpec:
    """Build a catalog potential from a name and a parameter map (CLI configs)."""
    try:
        factory = _POTENTIALS[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; choose from {sorted(_POTENTIALS)}") from None
    kwargs = dict(params or {})
    if a is not None:
        kwargs["a"] = a
    if M1 is not None:
        kwargs["M1"] = M1
    return factory(dim=dim, **kwargs)


def make_observable(name: str, *, M2=None, dim: int = 1) -> ObservableSpec:
    return observable(name, dim=dim, M2=M2)


# --- assumption checks ----------------------------------------------------------


@dataclass(frozen=True)
class CheckReport:
    """Worst-case margins of each inequality over the probe set.

    A margin is ``bound - value``; every margin must be ``>= -tol`` to pass.
    """

    margins: Mapping[str, float]
    worst_points: Mapping[str, tuple[float, ...]]
    radius: float
    n_probe: int
    tol: float

    @property
    def passed(self) -> bool:
        return all(m >= -self.tol for m in self.margins.values())

    @property
    def failures(self) -> list[str]:
        return [k for k, m in self.margins.items() if m < -self.tol]

    def __bool__(self):
        return self.passed


def _probe_points(dim: int, radius: float, n_probe: int, seed: int) -> Array:
    g = rng.stream(seed, lane=rng.LANE_PROBE)
    direc = g.standard_normal((n_probe, dim))
    direc /= np.linalg.norm(direc, axis=1, keepdims=True)
    r = radius * g.random(n_probe) ** (1.0 / dim)
    pts = direc * r[:, None]
    # the growth conditions bind at the boundary; always include the axis extremes
    extremes = np.concatenate([np.eye(dim), -np.eye(dim)]) * radius
    return np.concatenate([np.zeros((1, dim)), extremes, pts])


def check_assumptions(
    p: PotentialSpec,
    o: ObservableSpec,
    radius: float = 5.0,
    n_probe: int = 2000,
    seed: int = 0,
    tol: float = 1e-12,
    strict: bool = False,
) -> CheckReport:
    """Sample the ball of ``radius`` and report the margin of every inequality.

    Checked: ``|V^a(0)| <= M1``, ``V^a >= -M1``, ``|grad V^a| <= M1(1+|q|)``,
    the implied upper bound ``V^a <= 3/2 M1 + M1|q|^2``, ``|O| <= M2`` and
    ``|grad O| <= M2``. The check is probabilistic, not a proof.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if n_probe < 100:
        raise ValueError("n_probe must be at least 100")
    if p.dim != o.dim:
        raise ValueError("potential and observable dimensions differ")
    q = _probe_points(p.dim, radius, n_probe, seed)
    r = np.linalg.norm(q, axis=1)
    va = p.va(q)
    gva = np.linalg.norm(p.va_grad(q), axis=1)
    ov = np.abs(o.eval(q))
    og = np.linalg.norm(o.grad(q), axis=1)
    M1, M2 = p.M1, o.M2
    terms = {
        "va_at_zero": np.array([M1 - abs(va[0])]),
        "va_lower": va + M1,
        "va_grad": M1 * (1.0 + r) - gva,
        "va_upper": 1.5 * M1 + M1 * r * r - va,
        "obs_value": M2 - ov,
        "obs_grad": M2 - og,
    }
    margins = {}
    worst = {}
    for key, vals in terms.items():
        i = int(np.argmin(vals))
        margins[key] = float(vals[i])
        worst[key] = tuple(float(v) for v in (q[0] if key == "va_at_zero" else q[i]))
    report = CheckReport(margins, worst, float(radius), int(n_probe), float(tol))
    if strict and not report.passed:
        raise AssumptionError(f"assumption checks failed: {report.failures}")
    return report

