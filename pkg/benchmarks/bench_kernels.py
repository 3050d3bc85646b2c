"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Each kernel runs on identical inputs in both backends; outputs are compared
for bit equality before timings are reported.
"""

import argparse
import json
import sys
import time

import numpy as np

from raqmlab.kernels import compiled_backend, python_backend

P = 10007
LO = np.array([18700, 12900, 17600, 17600], dtype=np.int64)
N = np.array([41, 41, 41, 41], dtype=np.int64)


def cases(scale):
    runs = 20_000 * scale
    steps = 50_000 * scale
    return {
        "uniforms": (lambda be: be.uniforms(42, np.arange(runs, dtype=np.int64), 3, 7), f"{runs} draws"),
        "sample_runs": (lambda be: be.sample_runs(42, 0, runs, P, 4, LO, N), f"{runs} runs"),
        "lorenz_rk4": (lambda be: be.lorenz_rk4(1.0, 1.0, 1.0, 10.0, 28.0, 8 / 3, 1e-3, steps),
                       f"{steps} steps"),
        "lyapunov_benettin": (lambda be: be.lyapunov_benettin(1.0, 1.0, 1.0, 10.0, 28.0, 8 / 3, 0.01,
                                                              steps // 5, 200, 1e-8, 10),
                              f"{steps // 5} steps"),
    }


def same(a, b):
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=int, default=1, help="multiply problem sizes")
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)
    if compiled_backend is None:
        print("compiled kernels are not built; only the Python backend is available", file=sys.stderr)
        return 1

    rows = []
    print(f"{'kernel':<20}{'size':>16}{'python s':>12}{'compiled s':>12}{'speedup':>10}  identical")
    for name, (fn, size) in cases(args.scale).items():
        tp, op = best_of(lambda: fn(python_backend), args.repeat)
        tc, oc = best_of(lambda: fn(compiled_backend), args.repeat)
        ok = same(op, oc)
        rows.append({"kernel": name, "size": size, "python_s": tp, "compiled_s": tc,
                     "speedup": tp / tc, "identical": ok})
        print(f"{name:<20}{size:>16}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x  {ok}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["identical"] for r in rows) else 2


if __name__ == "__main__":
    sys.exit(main())
