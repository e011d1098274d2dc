"""Explicit error-bound constants and bound verdicts."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

__all__ = [
    "BoundConstants",
    "BoundVerdict",
    "check_bound",
    "compute_constants",
    "corollary_bound",
    "fit_rate",
]


@dataclass(frozen=True)
class BoundConstants:
    M1: float
    M2: float
    beta: float
    d: int
    a: float
    C0: float
    K1: float
    K2: float
    K: float
    L1: float
    L2: float
    L: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BoundVerdict:
    passed: bool
    measured_error: float
    mc_sigma: float
    bound: float
    margin: float  # bound - (error - 3 sigma); negative on failure

    def __bool__(self) -> bool:
        return self.passed


def _exp(x: float) -> float:
    # constants can exceed the float range; an infinite bound is vacuous, not an error
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def compute_constants(M1: float, M2: float, beta: float, d: int, a: float) -> BoundConstants:
    for name, v in (("M1", M1), ("M2", M2), ("beta", beta), ("d", d), ("a", a)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v!r}")
    C0 = d * beta / (2.0 * a) / math.tanh(a * beta / 2.0)
    eb = _exp(beta * M1)
    growth = _exp(6.0 * beta * M1 + 2.0 * C0 * M1)
    K1 = beta * eb * M1 * math.sqrt(d * (beta + 2.0 * C0) / 2.0)
    K2 = 0.5 * M2 * math.sqrt(d * beta)
    K = growth * M2 * math.sqrt(2.0 * d * (2.0 * beta + 3.0 * C0))
    L1 = beta * eb * M1 * math.sqrt(2.0 * d * (beta + 2.0 * C0) * (2.0 * beta + 1.0))
    L2 = M2 * math.sqrt(d * beta * (2.0 * beta + 1.0))
    L = 2.0 * growth * M2 * math.sqrt(2.0 * d * (2.0 * beta + 1.0) * (2.0 * beta + 3.0 * C0))
    return BoundConstants(M1, M2, beta, d, a, C0, K1, K2, K, L1, L2, L)


def check_bound(measured_error: float, mc_sigma: float, constant: float, denominator_sqrt_n: float) -> BoundVerdict:
    """Pass iff ``measured_error - 3 mc_sigma <= constant / sqrt(n)``.

    ``denominator_sqrt_n`` is the count ``n`` whose square root divides the
    constant (``N`` or ``D``).
    """
    if mc_sigma < 0:
        raise ValueError("mc_sigma must be nonnegative")
    if not denominator_sqrt_n > 0:
        raise ValueError("denominator must be positive")
    bound = constant / math.sqrt(denominator_sqrt_n)
    margin = bound - (measured_error - 3.0 * mc_sigma)
    return BoundVerdict(bool(margin >= 0), float(measured_error), float(mc_sigma), float(bound), float(margin))


def corollary_bound(c: BoundConstants, N: int, D: int) -> float:
    """``2 K (1/sqrt(N) + 2 sqrt(2 beta + 1)/sqrt(D))`` for the joint (N, D) error."""
    return 2.0 * c.K * (1.0 / math.sqrt(N) + 2.0 * math.sqrt(2.0 * c.beta + 1.0) / math.sqrt(D))


def fit_rate(points) -> tuple[float, float, float]:
    """Least-squares line through ``(log n, log error)``; returns slope, intercept, r^2."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4 or pts.shape[1] != 2:
        raise ValueError("need at least 4 (n, error) points")
    if np.any(pts[:, 0] <= 0) or np.any(pts[:, 1] <= 0):
        raise ValueError("n and error must be positive for a log-log fit")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    sst = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / sst if sst > 0 else 1.0
    return float(slope), float(intercept), float(r2)
