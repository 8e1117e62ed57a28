"""Compare the compiled and numpy leapfrog kernels.

    python benchmarks/bench_kernels.py [--n3d 96] [--n1d 100000] [--repeat 5]

Prints the best-of-N time per step for each backend and the max difference
between their outputs.
"""
import argparse
import time

import numpy as np

from wavescatter import _backend


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--n3d", type=int, default=96)
    ap.add_argument("--n1d", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    backends = {"numpy": _backend.get("numpy")}
    try:
        backends["cython"] = _backend.get("cython")
    except ImportError:
        print("compiled kernels not built; numpy only")

    u1 = [rng.standard_normal(args.n1d) for _ in range(3)]
    u3 = [rng.standard_normal((args.n3d,) * 3) for _ in range(3)]
    rows, outs = [], {}
    for name, k in backends.items():
        o1 = np.zeros(args.n1d)
        t1 = best_of(lambda: k.leapfrog1d(u1[0], u1[1], u1[2], o1, 1.0, 1e-4), args.repeat)
        o3 = np.zeros((args.n3d,) * 3)
        t3 = best_of(lambda: k.leapfrog3d(u3[0], u3[1], u3[2], o3, 0.25, 1e-3, False), args.repeat)
        o3p = np.zeros((args.n3d,) * 3)
        t3p = best_of(lambda: k.leapfrog3d(u3[0], u3[1], u3[2], o3p, 0.25, 1e-3, True), args.repeat)
        outs[name] = (o1, o3, o3p)
        rows.append((name, t1, t3, t3p))

    print(f"{'backend':<8} {'1d [ms]':>10} {'3d [ms]':>10} {'3d-per [ms]':>12}")
    for name, t1, t3, t3p in rows:
        print(f"{name:<8} {1e3 * t1:10.3f} {1e3 * t3:10.3f} {1e3 * t3p:12.3f}")
    if len(rows) == 2:
        print("speedup  " + " ".join(f"{a / b:10.2f}x" for a, b in zip(rows[0][1:], rows[1][1:])))
        diff = max(float(np.max(np.abs(a - b))) for a, b in zip(outs["numpy"], outs["cython"]))
        print(f"max |numpy - cython| = {diff:.3e}")


if __name__ == "__main__":
    main()
