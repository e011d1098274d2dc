"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the two hot paths: the V^a/O grid reduction behind every
continuous-loop estimate, and a block of Metropolis-adjusted Langevin steps
for the ring polymer. Both backends see identical inputs; the script also
reports the largest disagreement between them.
"""

import argparse
import timeit

import numpy as np

from pirkit import backend
from pirkit import potentials as P
from pirkit.spectral import discrete_basis, discrete_frequencies


def bench_grid(p, o, n, m, repeat):
    x = np.random.default_rng(0).standard_normal((n, m, p.dim))
    out = {}
    for name in ("python", "cython"):
        t = min(timeit.repeat(lambda: backend.grid_reduce(x, p, o, name), number=1, repeat=repeat))
        out[name] = (t, backend.grid_reduce(x, p, o, name)[0])
    return out


def bench_langevin(p, o, D, steps, repeat):
    beta = 1.0
    C = np.ascontiguousarray(discrete_basis(beta, D))
    stiff = discrete_frequencies(beta, D) ** 2 + p.a**2
    g = np.random.default_rng(1)
    noise = g.standard_normal((steps, D, p.dim))
    log_u = np.log(g.random(steps))
    xi0 = g.standard_normal((D, p.dim)) / np.sqrt(stiff)[:, None]
    out = {}
    for name in ("python", "cython"):
        def run():
            xi = xi0.copy()
            obs, en = np.empty(steps), np.empty(steps)
            backend.langevin_block(xi, C, stiff, beta / D, p, o, 0.2, noise, log_u, True, obs, en, backend=name)
            return obs

        t = min(timeit.repeat(run, number=1, repeat=repeat))
        out[name] = (t, run())
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not backend.compiled_available():
        raise SystemExit("compiled extension not built; nothing to compare")
    p = P.soft_bumped()
    o = P.observable("tanh2")
    cases = [
        ("grid_reduce n=20000 m=128", bench_grid(p, o, 20_000, 128, args.repeat)),
        ("grid_reduce n=4096 m=1024", bench_grid(p, o, 4096, 1024, args.repeat)),
        ("langevin D=16 steps=2000", bench_langevin(p, o, 16, 2000, args.repeat)),
        ("langevin D=64 steps=500", bench_langevin(p, o, 64, 500, args.repeat)),
    ]
    print(f"{'case':<28}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}{'max |diff|':>12}")
    for label, res in cases:
        tp, vp = res["python"]
        tc, vc = res["cython"]
        print(f"{label:<28}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}{np.max(np.abs(vp - vc)):>12.2e}")


if __name__ == "__main__":
    main()
