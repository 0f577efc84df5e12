"""Compiled vs pure-Python assignment kernel.

    python benchmarks/bench_assignment.py [--sizes 8 64 256 512] [--repeat 3]

Prints the best-of-N wall time per shape for each kernel and checks that
both return the same matching.  Also times one typical scoring workload
(per-video 3x3 problems) to show where the per-call overhead sits.
"""
import argparse
import time

import numpy as np

from ovre_eval import _lap_py
from ovre_eval.assignment import solve_max_assignment

try:
    from ovre_eval import _lap
except ImportError:
    _lap = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 32, 64, 128, 256, 512])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    kernels = [("python", _lap_py)] + ([("cython", _lap)] if _lap is not None else [])
    if _lap is None:
        print("compiled kernel not built; showing the python fallback only")
    rng = np.random.default_rng(args.seed)

    print(f"{'shape':>12}" + "".join(f"{name:>12}" for name, _ in kernels) + f"{'speedup':>10}")
    for n in args.sizes:
        for shape in ((n, n), (n, n + n // 4 + 1)):
            S = rng.uniform(-1, 1, size=shape)
            # a few exact ties so the refinement pass does real work
            S[:, : shape[1] // 8] = np.round(S[:, : shape[1] // 8], 1)
            row, results = [], []
            for _, mod in kernels:
                t, a = best_of(lambda: solve_max_assignment(S, kernel=mod), args.repeat)
                row.append(t)
                results.append(a)
            if len(results) == 2 and results[0].pairs != results[1].pairs:
                raise SystemExit(f"kernels disagree on shape {shape}")
            speed = f"{row[0] / row[-1]:9.1f}x" if len(row) == 2 else ""
            print(f"{'x'.join(map(str, shape)):>12}" + "".join(f"{t * 1e3:10.2f}ms" for t in row) + speed)

    small = [rng.uniform(-1, 1, size=(3, 3)) for _ in range(10_000)]
    print("\n10,000 x (3x3), as in per-video scoring:")
    for name, mod in kernels:
        t, _ = best_of(lambda: [solve_max_assignment(S, kernel=mod) for S in small], 1)
        print(f"  {name:>8}: {t:.3f} s")


if __name__ == "__main__":
    main()
