"""Time the compiled stencil kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--sizes 32,64,128] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from repairlab import kernels


def cases(n, rng):
    u, v = rng.standard_normal((2, n, n))
    rhs = rng.standard_normal((n - 2, n - 2))
    lam = np.zeros_like(rhs)
    p0 = np.zeros_like(rhs)
    return {
        "divergence": lambda m: m.divergence(u, v),
        "apply_operator": lambda m: m.apply_operator(rhs, lam, 1.0),
        "jacobi x20": lambda m: m.jacobi(rhs, lam, p0, 20, 1.0, 1.0),
        "sor x20": lambda m: m.sor_redblack(rhs, lam, p0, 20, 1.5, 1.0),
        "gradient_update": lambda m: m.gradient_update(u, v, rhs),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="32,64,128")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if "compiled" not in kernels.available_backends:
        print("compiled extension not built; only the python backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'n':>5}{'python ms':>12}{'compiled ms':>13}{'speedup':>9}")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, fn in cases(n, rng).items():
            t = {}
            for b in kernels.available_backends:
                mod = kernels.get_module(b)
                number = 20
                t[b] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number * 1e3
            tc = t.get("compiled", float("nan"))
            print(f"{name:<16}{n:>5}{t['python']:>12.4f}{tc:>13.4f}{t['python'] / tc:>9.1f}")


if __name__ == "__main__":
    main()
