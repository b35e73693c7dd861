"""Time the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [n]``. Each kernel is called
on the same random inputs under both backends; the script prints the best
of several repeats and checks that the outputs agree.
"""
import sys
import timeit

import numpy as np

from lfsurv._kernels import compiled_kernels, python_kernels


def make_inputs(n, rng):
    x = np.sort(rng.exponential(1.0, n))
    delta = (rng.random(n) < 0.7).astype(np.int64)
    knots = np.unique(x[delta == 0])
    values = rng.uniform(0.5, 2.0, knots.size + 1)
    F_knots = np.column_stack([knots, knots ** 2])
    F_x = np.column_stack([x, x ** 2])
    Z = rng.normal(size=(n, 2))
    eta = Z @ np.array([0.3, -0.2])
    return {
        "step_cumulative": (x, knots, values, F_knots, F_x),
        "event_table": (x, delta),
        "cox_breslow": (x, delta, Z, eta),
        "cox_residuals": (x, delta, Z, eta),
    }


def _flat(out):
    if isinstance(out, tuple):
        return [np.atleast_1d(np.asarray(o, dtype=float)) for o in out]
    return [np.asarray(out, dtype=float)]


def main(n=100_000, repeat=5):
    if compiled_kernels is None:
        print("compiled extension not built; only the numpy backend is available")
    rng = np.random.default_rng(20240101)
    inputs = make_inputs(n, rng)
    print(f"n = {n}")
    print(f"{'kernel':<16}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}")
    for name, args in inputs.items():
        fp = getattr(python_kernels, name)
        tp = min(timeit.repeat(lambda: fp(*args), number=1, repeat=repeat)) * 1e3
        if compiled_kernels is None:
            print(f"{name:<16}{tp:>14.2f}{'-':>14}{'-':>10}")
            continue
        fc = getattr(compiled_kernels, name)
        tc = min(timeit.repeat(lambda: fc(*args), number=1, repeat=repeat)) * 1e3
        for a, b in zip(_flat(fp(*args)), _flat(fc(*args))):
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)
        print(f"{name:<16}{tp:>14.2f}{tc:>14.2f}{tp / tc:>10.1f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 100_000)
