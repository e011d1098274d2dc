"""``pirkit`` command-line front end.

One TOML config per run; the command line may only override the seed and
the output directory. Exit codes: 0 ok, 2 config error, 3 numerical failure
(sampler, estimator or oracle), 4 a bound verdict failed.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
from dataclasses import asdict

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .estimators import EstimatorError, SamplerError, estimate_cl_discretized, estimate_cl_truncated, sample_std
from .harness import PlanError, SweepPlan, holder_scan, run_sweep, write_csv
from .oracle import OracleError, exact_thermal_average
from .potentials import make_observable, make_potential
from .spectral import covariance

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BOUND = 0, 2, 3, 4

REPRESENTATIONS = ("std", "cl", "cl-disc", "exact", "sweep", "covariance", "holder")

# section -> key -> accepted types
SCHEMA = {
    "": {"seed": int, "threads": int},
    "potential": {"name": str, "params": dict, "a": float, "M1": float, "dim": int},
    "observable": {"name": str, "M2": float},
    "run": {
        "representation": str, "beta": float, "N": int, "D": int, "n_samples": int,
        "n_quad": int, "step_h": float, "n_chains": int, "burn_in": float,
        "metropolis": bool, "ess_floor": float,
    },
    "sweep": {"mode": str, "N_values": list, "D_values": list},
    "oracle": {"n_grid": int, "Q": float, "tol": float, "cache_dir": str},
    "covariance": {"taus": list, "n_tau": int, "K_max": int},
    "holder": {"N": int, "n_samples": int, "deltas": list},
    "output": {"dir": str},
    "debug": {"bound_scale": float},
}

POSITIVE = {
    ("potential", "a"), ("potential", "M1"), ("potential", "dim"), ("observable", "M2"),
    ("run", "beta"), ("run", "N"), ("run", "D"), ("run", "n_samples"), ("run", "n_quad"),
    ("run", "step_h"), ("run", "n_chains"), ("oracle", "n_grid"), ("oracle", "Q"), ("oracle", "tol"),
    ("covariance", "n_tau"), ("covariance", "K_max"), ("holder", "N"), ("holder", "n_samples"),
    ("debug", "bound_scale"), ("", "threads"),
}

ESTIMATE_COLUMNS = (
    "config_hash", "representation", "potential", "potential_params", "observable",
    "beta", "a", "M1", "M2", "N", "D", "n_samples", "n_quad", "step_h", "n_chains",
    "seed", "estimate", "std_error", "ess", "ess_warning", "mean_A", "violations_A",
    "violations_B", "acceptance", "wall_time",
)


class ConfigError(ValueError):
    pass


def _check_type(where: str, value, typ):
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, bool):
        raise ConfigError(f"{where}: expected int, got bool")
    if not isinstance(value, typ):
        raise ConfigError(f"{where}: expected {typ.__name__}, got {type(value).__name__}")
    return value


def validate(raw: dict) -> dict:
    """Type-check ``raw`` against :data:`SCHEMA`; unknown keys are errors."""
    cfg = {}
    for key, value in raw.items():
        if isinstance(value, dict) and key in SCHEMA and key != "":
            section = {}
            for k, v in value.items():
                if k not in SCHEMA[key]:
                    raise ConfigError(f"unknown config key '{key}.{k}'")
                section[k] = _check_type(f"{key}.{k}", v, SCHEMA[key][k])
            cfg[key] = section
        elif key in SCHEMA[""]:
            cfg[key] = _check_type(key, value, SCHEMA[""][key])
        else:
            raise ConfigError(f"unknown config key '{key}'")
    for sec, k in POSITIVE:
        v = cfg.get(k) if sec == "" else cfg.get(sec, {}).get(k)
        if v is not None and not v > 0:
            raise ConfigError(f"'{f'{sec}.' if sec else ''}{k}' must be positive, got {v!r}")
    rep = cfg.get("run", {}).get("representation")
    if rep is not None and rep not in REPRESENTATIONS:
        raise ConfigError(f"'run.representation' must be one of {REPRESENTATIONS}, got {rep!r}")
    return cfg


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path!r}: {exc}") from exc
    return validate(raw)


def config_hash(cfg: dict) -> str:
    """Hash of every setting that can change results (output dir and threads excluded)."""
    c = copy.deepcopy(cfg)
    c.pop("threads", None)
    c.pop("output", None)
    return hashlib.sha256(json.dumps(c, sort_keys=True).encode()).hexdigest()[:16]


def _require(cfg, sec, key):
    try:
        return cfg[sec][key]
    except KeyError:
        raise ConfigError(f"missing config key '{sec}.{key}'") from None


def _threads(cfg) -> int:
    env = os.environ.get("PIRKIT_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"PIRKIT_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("PIRKIT_THREADS must be positive")
        return n
    return cfg.get("threads", 1)


def _build(cfg):
    ps = cfg.get("potential", {})
    os_ = cfg.get("observable", {})
    try:
        p = make_potential(_require(cfg, "potential", "name"), ps.get("params"), a=ps.get("a"), M1=ps.get("M1"),
                           dim=ps.get("dim", 1))
        o = make_observable(_require(cfg, "observable", "name"), M2=os_.get("M2"), dim=p.dim)
    except TypeError as exc:
        raise ConfigError(f"bad potential.params: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return p, o


def _outdir(cfg) -> str:
    d = cfg.get("output", {}).get("dir", "out")
    os.makedirs(d, exist_ok=True)
    return d


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=lambda v: v.item() if hasattr(v, "item") else str(v))
        fh.write("\n")


def _oracle_kwargs(cfg):
    oc = cfg.get("oracle", {})
    return {"n_grid": oc.get("n_grid", 2048), "Q": oc.get("Q"), "tol": oc.get("tol", 1e-7), "cache_dir": oc.get("cache_dir")}


def cmd_exact(cfg) -> int:
    p, o = _build(cfg)
    beta = _require(cfg, "run", "beta")
    ref = exact_thermal_average(p, o, beta, **_oracle_kwargs(cfg))
    rec = asdict(ref)
    rec["config_hash"] = config_hash(cfg)
    _write_json(os.path.join(_outdir(cfg), "exact.json"), rec)
    print(f"exact {o.name} beta={beta}: {ref.value!r} (drift {ref.drift:.2e})")
    return EXIT_OK


def cmd_estimate(cfg) -> int:
    p, o = _build(cfg)
    run = cfg.get("run", {})
    rep = run.get("representation", "cl")
    if rep not in ("std", "cl", "cl-disc"):
        raise ConfigError(f"estimate needs run.representation in std/cl/cl-disc, got {rep!r}")
    beta = _require(cfg, "run", "beta")
    n = _require(cfg, "run", "n_samples")
    seed = cfg.get("seed", 0)
    threads = _threads(cfg)
    floor = run.get("ess_floor", 0.05)
    stats = None
    N = D = None
    if rep == "std":
        D = _require(cfg, "run", "D")
        n_chains = run.get("n_chains", 4)
        res = sample_std(p, o, beta, D, -(-n // n_chains), step_h=run.get("step_h", 0.2), seed=seed,
                         n_chains=n_chains, burn_in=run.get("burn_in", 0.1), metropolis=run.get("metropolis", True),
                         threads=threads)
    elif rep == "cl":
        N = _require(cfg, "run", "N")
        res, stats = estimate_cl_truncated(p, o, beta, N, n, seed=seed, n_quad=run.get("n_quad"), threads=threads,
                                           ess_floor=floor)
    else:
        N, D = _require(cfg, "run", "N"), _require(cfg, "run", "D")
        res, stats = estimate_cl_discretized(p, o, beta, N, D, n, seed=seed, threads=threads, ess_floor=floor)
    viol = stats.violations(beta, p.M1, o.M2) if stats is not None else {"A": "", "B": ""}
    row = {
        "config_hash": config_hash(cfg),
        "representation": res.representation,
        "potential": p.name,
        "potential_params": json.dumps(dict(p.params), sort_keys=True),
        "observable": o.name,
        "beta": beta, "a": p.a, "M1": p.M1, "M2": o.M2, "N": N, "D": D,
        "n_samples": res.n_samples,
        "n_quad": res.diagnostics.get("n_quad"),
        "step_h": res.diagnostics.get("step_h"),
        "n_chains": res.diagnostics.get("n_chains"),
        "seed": seed,
        "estimate": res.estimate, "std_error": res.std_error, "ess": res.ess, "ess_warning": res.ess_warning,
        "mean_A": stats.mean_A if stats is not None else None,
        "violations_A": viol["A"], "violations_B": viol["B"],
        "acceptance": res.diagnostics.get("acceptance"),
        "wall_time": res.wall_time,
    }
    out = _outdir(cfg)
    write_csv(os.path.join(out, "estimate.csv"), [row], ESTIMATE_COLUMNS)
    _write_json(os.path.join(out, "estimate.json"), {**row, "diagnostics": res.diagnostics})
    warn = " [ESS below floor]" if res.ess_warning else ""
    print(f"{res.representation}: {res.estimate!r} +/- {res.std_error:.3e} (ess {res.ess:.0f}){warn}")
    return EXIT_OK


def cmd_sweep(cfg) -> int:
    p, o = _build(cfg)
    sw = cfg.get("sweep", {})
    run = cfg.get("run", {})
    oc = _oracle_kwargs(cfg)
    try:
        plan = SweepPlan(
            potential=_require(cfg, "potential", "name"),
            observable=o.name,
            beta=_require(cfg, "run", "beta"),
            a=p.a,
            mode=sw.get("mode", "cl"),
            N_values=tuple(sw.get("N_values", ())),
            D_values=tuple(sw.get("D_values", ())),
            n_samples=run.get("n_samples", 100_000),
            seed=cfg.get("seed", 0),
            potential_params=dict(cfg["potential"].get("params", {})),
            M1=p.M1,
            M2=o.M2,
            n_grid=oc["n_grid"],
            Q=oc["Q"],
            oracle_tol=oc["tol"],
            oracle_cache=oc["cache_dir"],
            step_h=run.get("step_h", 0.2),
            n_chains=run.get("n_chains", 4),
            metropolis=run.get("metropolis", True),
            threads=_threads(cfg),
            bound_scale=cfg.get("debug", {}).get("bound_scale", 1.0),
        )
    except PlanError as exc:
        raise ConfigError(str(exc)) from exc
    report = run_sweep(plan)
    out = _outdir(cfg)
    report.write(os.path.join(out, "sweep.csv"), os.path.join(out, "sweep.json"), config_hash(cfg))
    for pt in report.points:
        print(f"{pt.representation:>16}  err {pt.error:.3e} +/- {pt.error_sigma:.1e}  bound {pt.bound:.3e}  {pt.verdict}")
    for k, fit in report.fits.items():
        if fit:
            print(f"rate in {k}: slope {fit['slope']:.3f} (r2 {fit['r2']:.3f})")
    for f in report.flags:
        print(f"flag: {f}")
    if report.any_bound_failed:
        return EXIT_BOUND
    if any(pt.status != "ok" for pt in report.points):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_covariance(cfg) -> int:
    beta = _require(cfg, "run", "beta")
    a = cfg.get("potential", {}).get("a", 1.0)
    cc = cfg.get("covariance", {})
    if "taus" in cc:
        taus = [float(t) for t in cc["taus"]]
    else:
        n = cc.get("n_tau", 19)
        taus = list(beta * np.arange(1, n + 1) / (n + 1))
    K_max = cc.get("K_max", 100_000)
    rows = []
    for t in taus:
        closed = covariance(beta, a, t, "closed")
        spec = covariance(beta, a, t, "spectral", K_max=K_max)
        meh = covariance(beta, a, t, "mehler") if 0.0 < t < beta else float("nan")
        diffs = [abs(closed - spec)] + ([abs(closed - meh)] if meh == meh else [])
        rows.append({"tau": float(t), "closed": closed, "spectral": spec, "mehler": meh, "max_abs_diff": max(diffs)})
    cols = ("config_hash", "beta", "a", "tau", "closed", "spectral", "mehler", "max_abs_diff")
    h = config_hash(cfg)
    for r in rows:
        r.update(config_hash=h, beta=beta, a=a)
    write_csv(os.path.join(_outdir(cfg), "covariance.csv"), rows, cols)
    print(f"covariance: {len(rows)} taus, max |diff| {max(r['max_abs_diff'] for r in rows):.3e}")
    return EXIT_OK


def cmd_holder(cfg) -> int:
    beta = _require(cfg, "run", "beta")
    pc = cfg.get("potential", {})
    hc = cfg.get("holder", {})
    deltas = hc.get("deltas", [0.1, 0.05, 0.025, 0.0125, 0.00625, 0.0])
    try:
        table = holder_scan(beta, pc.get("a", 1.0), pc.get("dim", 1), hc.get("N", 1024), hc.get("n_samples", 20_000),
                            deltas, seed=cfg.get("seed", 0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    h = config_hash(cfg)
    rows = [{**r, "config_hash": h, "seed": cfg.get("seed", 0)} for r in table.rows]
    cols = ("config_hash", "seed", "delta", "msd", "std_error", "exact", "bound", "within_bound", "holder_q99")
    out = _outdir(cfg)
    write_csv(os.path.join(out, "holder.csv"), rows, cols)
    _write_json(os.path.join(out, "holder.json"),
                {"config_hash": h, "slope": table.slope, "all_within_bound": table.all_within_bound})
    print(f"holder: slope {table.slope}, all within bound: {table.all_within_bound}")
    return EXIT_OK if table.all_within_bound else EXIT_BOUND


COMMANDS = {
    "exact": cmd_exact,
    "estimate": cmd_estimate,
    "sweep": cmd_sweep,
    "covariance": cmd_covariance,
    "holder": cmd_holder,
}


def cmd_run(cfg) -> int:
    rep = cfg.get("run", {}).get("representation")
    if rep is None:
        raise ConfigError("missing config key 'run.representation'")
    if rep in ("std", "cl", "cl-disc"):
        return cmd_estimate(cfg)
    return COMMANDS[rep](cfg)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pirkit", description="Path-integral thermal averages and convergence checks.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "run"):
        sp = sub.add_parser(name)
        sp.add_argument("config", help="TOML run configuration")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--output", help="override the output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.output is not None:
            cfg.setdefault("output", {})["dir"] = args.output
        fn = cmd_run if args.command == "run" else COMMANDS[args.command]
        return fn(cfg)
    except ValueError as exc:  # ConfigError, PlanError and argument checks
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SamplerError, EstimatorError, OracleError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
