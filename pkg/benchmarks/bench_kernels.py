"""Compare the compiled and pure-numpy twisted sums on the standard triple.

Usage: python benchmarks/bench_kernels.py [points ...]
"""
import sys
import timeit

import numpy as np

from twistyoung import kernels
from twistyoung.core import DEFAULT_EXPONENTS, GaussianTriple
from twistyoung.quadrature import FormEvaluator, build_rule


def setup(points: int):
    rule = build_rule(points, 4, 0.5)
    ev = FormEvaluator(rule, 0.3 * np.eye(2))
    G = GaussianTriple.standard(DEFAULT_EXPONENTS, 1)
    u = ev._samples(G[0])
    v = ev._samples(G[1])
    F3 = ev._pair_samples(G[2])
    return u, v, F3, ev.points, ev.Z


def main(argv):
    sizes = [int(a) for a in argv] or [16, 24, 32, 40]
    print(f"compiled backend: {kernels.BACKEND}")
    print(f"{'points':>6} {'mode':>10} {'python ms':>10} {'compiled ms':>12} {'speedup':>8} {'abs diff':>10}")
    for n in sizes:
        args = setup(n)
        for name, code in kernels.MODES.items():
            reps = max(1, int(2e6 / n**4))
            tp = min(timeit.repeat(lambda: kernels.python_twisted_sum(*args, code), number=reps, repeat=3)) / reps
            tc = min(timeit.repeat(lambda: kernels.twisted_sum(*args, code), number=reps, repeat=3)) / reps
            diff = abs(kernels.python_twisted_sum(*args, code) - kernels.twisted_sum(*args, code))
            print(f"{n:>6} {name:>10} {tp * 1e3:>10.2f} {tc * 1e3:>12.2f} {tp / tc:>8.2f} {diff:>10.1e}")


if __name__ == "__main__":
    main(sys.argv[1:])
