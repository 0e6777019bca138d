#!/usr/bin/env python3
"""Compare the numba and numpy association kernels.

Usage:
    python3 benchmarks/bench_kernels.py [--points 10000 100000] [--cells 3 6] [--repeat 5]

For every size it times both backends (best of ``--repeat``, after one
warm-up call so JIT compilation is excluded) and checks that the two
agree: identical labels, memberships and masses to 1e-12.
"""

import argparse
import time

import numpy as np

from isac_ot import _kernels as k


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def case(n, m, repeat, n_iter=20, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1000, size=(n, 3))
    sites = rng.uniform(0, 1000, size=(m, 3))
    density = rng.uniform(0.5, 2.0, size=(n, m))
    labels0 = k.voronoi_labels_np(pts, sites, np.zeros(m))
    K = 18.0

    rows = []
    pairs = {
        "voronoi_labels": (lambda: k.voronoi_labels_np(pts, sites, np.zeros(m)),
                           lambda: k.voronoi_labels_nb(pts, sites, np.zeros(m))),
        "theorem1_labels": (lambda: k.theorem1_labels_np(density, np.full(m, K / m), K),
                            lambda: k.theorem1_labels_nb(density, np.full(m, K / m), K)),
        "alg1_loop": (lambda: k.alg1_loop_np(density, labels0, K, n_iter),
                      lambda: k.alg1_loop_nb(density, labels0, K, n_iter)),
    }
    for name, (f_np, f_nb) in pairs.items():
        a, b = f_np(), f_nb()
        a = a if isinstance(a, tuple) else (a,)
        b = b if isinstance(b, tuple) else (b,)
        same = all(np.allclose(x, y, rtol=1e-12, atol=0) for x, y in zip(a, b))
        t_np, t_nb = best_of(f_np, repeat), best_of(f_nb, repeat)
        rows.append((name, n, m, t_np, t_nb, t_np / t_nb, same))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, nargs="+", default=[10_000, 100_000])
    ap.add_argument("--cells", type=int, nargs="+", default=[3, 6])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not k._HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'kernel':<16}{'points':>9}{'M':>4}{'numpy ms':>11}{'numba ms':>11}{'speedup':>9}  agree")
    for n in args.points:
        for m in args.cells:
            for name, n_, m_, t_np, t_nb, sp, same in case(n, m, args.repeat):
                print(f"{name:<16}{n_:>9}{m_:>4}{t_np * 1e3:>11.2f}{t_nb * 1e3:>11.2f}{sp:>9.1f}  {same}")


if __name__ == "__main__":
    main()
