"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--users 100000] [--repeat 5]

Each kernel is timed on both backends with identical inputs; the outputs are
checked for bit-identity before timing.
"""
import argparse
import timeit

import numpy as np

from resopt import kernels
from resopt.pricing import submission_grid


def cases(n):
    rng = np.random.default_rng(0)
    p, q, p1, p21, p22, q2a, q2b = rng.random((7, n))
    active = np.ones(n, dtype=np.uint8)
    grid = submission_grid(1e-3)
    small = np.ascontiguousarray(p[: max(1, n // 20)])
    return {
        "uniforms": lambda k: k.uniforms(1, 0, n, kernels.SLOT_P),
        "grid_argmin (n/20 users)": lambda k: k.grid_argmin(small, 1.5, grid),
        "two_period_rep": lambda k: k.two_period_rep(1, 0, p, q, active, 1.5, kernels.SLOT_USE),
        "three_period_rep": lambda k: k.three_period_rep(1, 0, p1, p21, p22, q, q2a, q2b, active,
                                                         1.0, 2.0, 0.25, kernels.SLOT_STATE, kernels.SLOT_USE),
    }


def same(a, b):
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    names = kernels.available()
    backends = {name: kernels.get(name) for name in names}
    print(f"{args.users} users, best of {args.repeat}; active backend: {kernels.BACKEND}")
    print(f"{'kernel':<26}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases(args.users).items():
        outputs = [fn(b) for b in backends.values()]
        assert all(same(outputs[0], o) for o in outputs[1:]), f"{label}: backends disagree"
        times = [min(timeit.repeat(lambda b=b: fn(b), number=1, repeat=args.repeat)) for b in backends.values()]
        row = f"{label:<26}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[0] / times[1]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
