"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 12 16 20] [--repeat 3]
"""

import argparse
import time

import numpy as np

from hqbenders import _fallback
from hqbenders.qubo import QuboMatrix
from hqbenders.samplers import SamplerParams, solve_exhaustive, solve_sa
import hqbenders.kernels as kernels

try:
    from hqbenders import _kernels
except ImportError:
    _kernels = None


def random_qubo(rng, N):
    U = np.triu(rng.integers(-8, 9, (N, N)).astype(float))
    return QuboMatrix(U + np.triu(U, 1).T)


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def with_impl(impl, fn):
    saved = kernels.anneal, kernels.enumerate_min
    kernels.anneal, kernels.enumerate_min = impl.anneal, impl.enumerate_min
    try:
        return fn()
    finally:
        kernels.anneal, kernels.enumerate_min = saved


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[12, 16, 20])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--reads", type=int, default=20)
    parser.add_argument("--sweeps", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    impls = {"python": _fallback}
    if _kernels is not None:
        impls["cython"] = _kernels
    else:
        print("compiled extension not built; timing the fallback only")

    rng = np.random.default_rng(args.seed)
    params = SamplerParams("sa", seed=args.seed, num_reads=args.reads, sweeps=args.sweeps)
    print(f"{'kernel':<12}{'N':>4}" + "".join(f"{name:>12}" for name in impls) + f"{'speedup':>10}")
    for N in args.sizes:
        q = random_qubo(rng, N)
        for label, job in (("anneal", lambda: solve_sa(q, params)), ("enumerate", lambda: solve_exhaustive(q))):
            t = {name: best_time(lambda: with_impl(impl, job), args.repeat) for name, impl in impls.items()}
            speedup = t["python"] / t["cython"] if "cython" in t else float("nan")
            print(f"{label:<12}{N:>4}" + "".join(f"{t[name]:>11.4f}s" for name in impls) + f"{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
