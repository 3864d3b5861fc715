"""Compiled vs NumPy kernels: timing and agreement.

    python benchmarks/bench_kernels.py [--repeat 5]

Times ``adaptive_family`` (the per-frequency quadrature behind every multiplier
value) and ``curve_sum`` (the direct operator's inner loop) in both backends.
"""
import argparse
import sys
import time

import numpy as np

from oscint import _pykernels
from oscint.phase import EXP, POWER

try:
    from oscint import _kernels
except ImportError:
    _kernels = None

# (code, p1, p2, sign, k, theta, xi, eta, a, b)
QUAD_CASES = {
    "power, low frequency": (POWER, 3.0, 1.0, 1.0, 2, 0.0, 5.0, 80.0, 0.2, 1.0),
    "power, theta=0.5": (POWER, 2.5, 1.0, 1.0, 2, 0.5, -300.0, 1200.0, 0.1, 0.9),
    "power, high frequency": (POWER, 3.0, 1.0, 1.0, 2, 0.0, -4000.0, 9000.0, 0.3, 1.0),
    "exp": (EXP, 3.0, 1.0, 1.0, 2, 0.0, 10.0, -40.0, 0.5, 1.0),
}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_quadrature(repeat, tol):
    print(f"adaptive_family (tol={tol:g})")
    print(f"  {'case':24s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s} {'|diff|':>9s}")
    for name, case in QUAD_CASES.items():
        tp, rp = best_of(lambda: _pykernels.adaptive_family(*case, tol), repeat)
        tc, rc = best_of(lambda: _kernels.adaptive_family(*case, tol), repeat)
        print(f"  {name:24s} {tp * 1e3:8.3f}ms {tc * 1e3:8.3f}ms {tp / tc:7.1f}x "
              f"{abs(rp[0] - rc[0]):9.1e}")


def bench_curve_sum(repeat, sizes, n_nodes):
    rng = np.random.default_rng(0)
    print(f"curve_sum ({n_nodes} curve nodes)")
    print(f"  {'grid':24s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s} {'max diff':>9s}")
    for n in sizes:
        data = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        t = np.sort(rng.uniform(0.0, 1.0, n_nodes))
        w = rng.standard_normal(n_nodes) + 1j * rng.standard_normal(n_nodes)
        args = (data, -2.0, -2.0, 4.0 / n, 4.0 / n, t, t * t, w, True)
        tp, a = best_of(lambda: _pykernels.curve_sum(*args), repeat)
        tc, b = best_of(lambda: _kernels.curve_sum(*args), repeat)
        print(f"  {f'{n}x{n}':24s} {tp * 1e3:8.1f}ms {tc * 1e3:8.1f}ms {tp / tc:7.1f}x "
              f"{np.max(np.abs(a - b)):9.1e}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--tol", type=float, default=1e-9)
    ap.add_argument("--nodes", type=int, default=200)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`",
              file=sys.stderr)
        return 1
    bench_quadrature(args.repeat, args.tol)
    print()
    bench_curve_sum(args.repeat, args.sizes, args.nodes)
    return 0


if __name__ == "__main__":
    sys.exit(main())
