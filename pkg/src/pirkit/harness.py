"""Convergence sweeps over N and D, bound verdicts, and report output.

Sweep modes:

``std``      ring-polymer Langevin at each D against the grid oracle
``cl``       truncated loop estimator at each N against the oracle, bound K/sqrt(N)
``cl-disc``  discretised vs truncated estimator on shared loops, bound L/sqrt(D)
``joint``    discretised estimator at each (N, D) against the oracle, combined bound
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng
from .bounds import BoundConstants, check_bound, compute_constants, corollary_bound, fit_rate
from .estimators import (
    BLOCK,
    EstimatorError,
    SamplerError,
    ab_samples,
    estimate_cl_discretized,
    estimate_cl_truncated,
    paired_difference,
    sample_std,
)
from .oracle import OracleError, exact_thermal_average
from .potentials import harmonic, make_observable, make_potential, observable
from .spectral import c0_constant, increment_msd, mode_values, nu_block

__all__ = [
    "CSV_COLUMNS",
    "ConvergenceReport",
    "HolderTable",
    "PlanError",
    "PointResult",
    "SweepPlan",
    "holder_scan",
    "loop_norm_mean",
    "run_sweep",
    "write_csv",
]

MODES = ("std", "cl", "cl-disc", "joint")

CSV_COLUMNS = (
    "config_hash", "mode", "potential", "observable", "beta", "a", "N", "D",
    "n_samples", "seed", "representation", "estimate", "std_error", "ess",
    "ess_warning", "reference", "error", "error_sigma", "bound_name", "bound",
    "verdict", "margin", "mean_A", "violations_A", "violations_B",
    "mean_abs_dA", "mean_abs_dB", "status", "wall_time",
)


class PlanError(ValueError):
    pass


def _strictly_increasing(xs) -> bool:
    return all(b > a for a, b in zip(xs, xs[1:]))


@dataclass(frozen=True)
class SweepPlan:
    potential: str
    observable: str
    beta: float
    a: float
    mode: str = "cl"
    N_values: tuple = ()
    D_values: tuple = ()
    n_samples: int = 100_000
    seed: int = 0
    potential_params: dict = field(default_factory=dict)
    M1: float | None = None
    M2: float | None = None
    n_grid: int = 2048
    Q: float | None = None
    oracle_tol: float = 1e-7
    oracle_cache: str | None = None
    step_h: float = 0.2
    n_chains: int = 4
    metropolis: bool = True
    threads: int = 1
    bound_scale: float = 1.0  # debug only: multiplies every bound constant

    def __post_init__(self):
        if self.mode not in MODES:
            raise PlanError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.beta > 0 or not self.a > 0:
            raise PlanError("beta and a must be positive")
        if self.n_samples < 1000:
            raise PlanError("n_samples must be at least 1000")
        needs_N = self.mode in ("cl", "cl-disc", "joint")
        needs_D = self.mode in ("std", "cl-disc", "joint")
        if needs_N and not self.N_values:
            raise PlanError(f"mode {self.mode!r} needs a nonempty N list")
        if needs_D and not self.D_values:
            raise PlanError(f"mode {self.mode!r} needs a nonempty D list")
        for name in ("N_values", "D_values"):
            xs = tuple(int(v) for v in getattr(self, name))
            if any(v < 1 for v in xs) or not _strictly_increasing(xs):
                raise PlanError(f"{name} must be positive and strictly increasing")
            object.__setattr__(self, name, xs)

    def build(self):
        p = make_potential(self.potential, self.potential_params, a=self.a, M1=self.M1)
        o = make_observable(self.observable, dim=p.dim, M2=self.M2)
        return p, o


@dataclass
class PointResult:
    N: int | None
    D: int | None
    representation: str
    estimate: float = math.nan
    std_error: float = math.nan
    n_samples: int = 0
    ess: float = math.nan
    ess_warning: bool = False
    reference: float = math.nan
    error: float = math.nan
    error_sigma: float = math.nan
    bound_name: str = ""
    bound: float = math.nan
    verdict: str = "n/a"  # pass | fail | n/a
    margin: float = math.nan
    mean_A: float = math.nan
    violations_A: int = 0
    violations_B: int = 0
    mean_abs_dA: float = math.nan
    mean_abs_dB: float = math.nan
    status: str = "ok"
    wall_time: float = 0.0


@dataclass
class ConvergenceReport:
    plan: SweepPlan
    constants: BoundConstants
    oracle_value: float | None
    oracle_drift: float | None
    points: list
    fits: dict
    flags: list
    runtime: float

    @property
    def all_passed(self) -> bool:
        return all(pt.verdict != "fail" for pt in self.points) and all(pt.status == "ok" for pt in self.points)

    @property
    def any_bound_failed(self) -> bool:
        return any(pt.verdict == "fail" for pt in self.points)

    def rows(self, config_hash: str = "") -> list:
        pl = self.plan
        out = []
        for pt in self.points:
            row = {
                "config_hash": config_hash,
                "mode": pl.mode,
                "potential": pl.potential,
                "observable": pl.observable,
                "beta": pl.beta,
                "a": pl.a,
                "seed": pl.seed,
            }
            row.update({k: v for k, v in asdict(pt).items()})
            out.append({k: row.get(k, "") for k in CSV_COLUMNS})
        return out

    def summary(self, config_hash: str = "") -> dict:
        return {
            "config_hash": config_hash,
            "plan": asdict(self.plan),
            "constants": self.constants.as_dict(),
            "oracle_value": self.oracle_value,
            "oracle_drift": self.oracle_drift,
            "verdicts": [
                {"N": pt.N, "D": pt.D, "verdict": pt.verdict, "bound": pt.bound, "margin": pt.margin, "status": pt.status}
                for pt in self.points
            ],
            "fits": self.fits,
            "flags": self.flags,
            "all_passed": self.all_passed,
            "runtime": self.runtime,
        }

    def write(self, csv_path, json_path, config_hash: str = "") -> None:
        write_csv(csv_path, self.rows(config_hash))
        with open(json_path, "w") as fh:
            json.dump(self.summary(config_hash), fh, indent=2, default=_json_default)
            fh.write("\n")


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(f"not serialisable: {type(v).__name__}")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def write_csv(path, rows, columns=CSV_COLUMNS) -> None:
    """Rows as CSV with a fixed header; floats written with ``repr`` (round-trip exact)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])


def _fill_from_result(pt: PointResult, res, stats, p, o, beta):
    pt.estimate = res.estimate
    pt.std_error = res.std_error
    pt.n_samples = res.n_samples
    pt.ess = res.ess
    pt.ess_warning = res.ess_warning
    if stats is not None:
        pt.mean_A = stats.mean_A
        v = stats.violations(beta, p.M1, o.M2)
        pt.violations_A, pt.violations_B = v["A"], v["B"]


def _apply_bound(pt: PointResult, name: str, constant: float, n: float):
    v = check_bound(pt.error, pt.error_sigma, constant, n)
    pt.bound_name = name
    pt.bound = v.bound
    pt.margin = v.margin
    pt.verdict = "pass" if v.passed else "fail"


def _point_std(plan, p, o, c, ref, D):
    pt = PointResult(None, D, f"std(D={D})")
    n_steps = -(-plan.n_samples // plan.n_chains)
    res = sample_std(p, o, plan.beta, D, n_steps, step_h=plan.step_h, seed=plan.seed, n_chains=plan.n_chains,
                     metropolis=plan.metropolis)
    _fill_from_result(pt, res, None, p, o, plan.beta)
    pt.reference = ref
    pt.error = abs(res.estimate - ref)
    pt.error_sigma = res.std_error
    return pt


def _point_cl(plan, p, o, c, ref, N):
    pt = PointResult(N, None, f"cl(N={N})")
    res, stats = estimate_cl_truncated(p, o, plan.beta, N, plan.n_samples, seed=plan.seed)
    _fill_from_result(pt, res, stats, p, o, plan.beta)
    pt.reference = ref
    pt.error = abs(res.estimate - ref)
    pt.error_sigma = res.std_error
    _apply_bound(pt, "K/sqrt(N)", plan.bound_scale * c.K, N)
    return pt


def _point_cl_disc(plan, p, o, c, ref_stats, N, D):
    pt = PointResult(N, D, f"cl(N={N},D={D})")
    res, stats = estimate_cl_discretized(p, o, plan.beta, N, D, plan.n_samples, seed=plan.seed)
    _fill_from_result(pt, res, stats, p, o, plan.beta)
    diff, se = paired_difference(ref_stats.log_A, ref_stats.B, stats.log_A, stats.B)
    dd = stats.differences(ref_stats)
    pt.mean_abs_dA = dd["mean_abs_dA"]
    pt.mean_abs_dB = dd["mean_abs_dB"]
    pt.reference = float(np.sum(np.exp(ref_stats.log_A - ref_stats.log_A.max()) * ref_stats.B)
                         / np.sum(np.exp(ref_stats.log_A - ref_stats.log_A.max())))
    pt.error = abs(diff)
    pt.error_sigma = se
    pt.violations_A = max(pt.violations_A, ref_stats.violations(plan.beta, p.M1, o.M2)["A"])
    pt.violations_B = max(pt.violations_B, ref_stats.violations(plan.beta, p.M1, o.M2)["B"])
    _apply_bound(pt, "L/sqrt(D)", plan.bound_scale * c.L, D)
    return pt


def _point_joint(plan, p, o, c, ref, N, D):
    pt = PointResult(N, D, f"cl(N={N},D={D})")
    res, stats = estimate_cl_discretized(p, o, plan.beta, N, D, plan.n_samples, seed=plan.seed)
    _fill_from_result(pt, res, stats, p, o, plan.beta)
    pt.reference = ref
    pt.error = abs(res.estimate - ref)
    pt.error_sigma = res.std_error
    _apply_bound(pt, "2K(1/sqrt(N)+2sqrt(2beta+1)/sqrt(D))", plan.bound_scale * corollary_bound(c, N, D), 1)
    return pt


def _guard(fn, fallback: PointResult):
    t0 = time.perf_counter()
    try:
        pt = fn()
    except (SamplerError, EstimatorError) as exc:
        pt = fallback
        pt.status = f"error: {exc}"
    pt.wall_time = time.perf_counter() - t0
    return pt


def _oracle(plan, p, o):
    if p.dim != 1:
        raise PlanError("the oracle is one-dimensional; this plan has no reference")
    try:
        return exact_thermal_average(p, o, plan.beta, n_grid=plan.n_grid, Q=plan.Q, tol=plan.oracle_tol,
                                     cache_dir=plan.oracle_cache)
    except OracleError as exc:
        raise PlanError(f"oracle unavailable: {exc}") from exc


def _fit(points, key):
    usable = [(getattr(pt, key), pt.error) for pt in points if pt.status == "ok" and pt.error > 0]
    if len(usable) < 4:
        return None
    slope, intercept, r2 = fit_rate(usable)
    return {"slope": slope, "intercept": intercept, "r2": r2, "n_points": len(usable)}


def run_sweep(plan: SweepPlan) -> ConvergenceReport:
    """Run every point of ``plan`` and assemble verdicts and rate fits.

    Points run concurrently over ``plan.threads`` workers; all use the
    plan's seed, so loops are shared (nested) across N and D. Point-level
    sampler or estimator errors are recorded and the sweep continues.
    """
    t0 = time.perf_counter()
    p, o = plan.build()
    c = compute_constants(p.M1, o.M2, plan.beta, p.dim, p.a)
    flags = []
    oracle_value = oracle_drift = None
    if plan.mode != "cl-disc":
        ref = _oracle(plan, p, o)
        oracle_value, oracle_drift = ref.value, ref.drift

    jobs = []
    if plan.mode == "std":
        for D in plan.D_values:
            jobs.append((lambda D=D: _point_std(plan, p, o, c, oracle_value, D), PointResult(None, D, f"std(D={D})")))
    elif plan.mode == "cl":
        for N in plan.N_values:
            jobs.append((lambda N=N: _point_cl(plan, p, o, c, oracle_value, N), PointResult(N, None, f"cl(N={N})")))
    elif plan.mode == "joint":
        for N in plan.N_values:
            for D in plan.D_values:
                jobs.append((lambda N=N, D=D: _point_joint(plan, p, o, c, oracle_value, N, D),
                             PointResult(N, D, f"cl(N={N},D={D})")))
    else:
        refs = {}
        for N in plan.N_values:
            refs[N] = ab_samples(p, o, plan.beta, N, plan.n_samples, plan.seed, threads=plan.threads)
            for D in plan.D_values:
                jobs.append((lambda N=N, D=D: _point_cl_disc(plan, p, o, c, refs[N], N, D),
                             PointResult(N, D, f"cl(N={N},D={D})")))

    def run(job):
        return _guard(*job)

    if plan.threads > 1:
        with ThreadPoolExecutor(max_workers=plan.threads) as pool:
            points = list(pool.map(run, jobs))
    else:
        points = [run(j) for j in jobs]

    fits = {}
    if plan.mode == "cl":
        fits["N"] = _fit(points, "N")
    elif plan.mode == "std":
        fits["D"] = _fit(points, "D")
    elif plan.mode == "cl-disc":
        for N in plan.N_values:
            fits[f"D@N={N}"] = _fit([pt for pt in points if pt.N == N], "D")
    if any(v is None for v in fits.values()) or not fits:
        flags.append("rate_fit_skipped: fewer than 4 usable points")
    if any(pt.ess_warning for pt in points):
        flags.append("ess_below_floor")
    if any(pt.status != "ok" for pt in points):
        flags.append("point_errors")
    if any(pt.violations_A or pt.violations_B for pt in points):
        flags.append("per_sample_bound_violations")
    return ConvergenceReport(plan, c, oracle_value, oracle_drift, points, fits, flags, time.perf_counter() - t0)


# --- Gaussian loop statistics ---------------------------------------------------


@dataclass(frozen=True)
class HolderTable:
    rows: list
    slope: float | None

    @property
    def all_within_bound(self) -> bool:
        return all(r["within_bound"] for r in self.rows)


def holder_scan(beta: float, a: float, d: int, N: int, n_samples: int, deltas, seed: int = 0) -> HolderTable:
    """Monte Carlo ``E|x(tau + delta) - x(tau)|^2`` under ``nu`` for each delta.

    Each loop gets its own uniform base time ``tau``. Rows also carry the
    exact truncated value, the bound ``d (2 beta + 1) delta``, and the 99th
    percentile of ``|dx| / delta^0.4``.
    """
    deltas = [float(x) for x in deltas]
    if any(x < 0 for x in deltas):
        raise ValueError("deltas must be nonnegative")
    if any(b >= a_ for a_, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    xi = np.concatenate([nu_block(beta, N, d, a, nb, seed, b) for b, nb in _blocks(n_samples)])
    tau = rng.stream(seed, 0, 0, rng.LANE_PROBE).random(n_samples) * beta
    c_tau = mode_values(beta, N, tau)  # (N, n)
    rows = []
    for delta in deltas:
        dc = mode_values(beta, N, tau + delta) - c_tau
        dx = np.einsum("kn,nkd->nd", dc, xi)
        sq = np.sum(dx * dx, axis=1)
        msd = float(sq.mean())
        se = float(sq.std(ddof=1) / math.sqrt(n_samples))
        bound = d * (2.0 * beta + 1.0) * delta
        hold = float(np.percentile(np.sqrt(sq) / delta**0.4, 99)) if delta > 0 else 0.0
        rows.append({
            "delta": delta,
            "msd": msd,
            "std_error": se,
            "exact": increment_msd(beta, a, d, 0.0, delta, N=N),
            "bound": bound,
            "within_bound": bool(msd <= bound + 3.0 * se),
            "holder_q99": hold,
        })
    pos = [(r["delta"], r["msd"]) for r in rows if r["delta"] > 0 and r["msd"] > 0]
    slope = fit_rate(pos)[0] if len(pos) >= 4 else None
    return HolderTable(rows, slope)


def _blocks(n):
    return [(b, min(BLOCK, n - b * BLOCK)) for b in range(-(-n // BLOCK))]


def loop_norm_mean(beta: float, a: float, d: int, N: int, n_samples: int, seed: int = 0):
    """Monte Carlo mean and standard error of ``int_0^beta |x_N(tau)|^2 dtau`` under ``nu``."""
    p = harmonic(omega=a, a=a, dim=d)  # V^a == 0, so every weight is 1
    o = observable("q2", dim=d)
    stats = ab_samples(p, o, beta, N, n_samples, seed)
    vals = beta * stats.B
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples)), c0_constant(d, beta, a)
