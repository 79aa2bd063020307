"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--N 32] [--M 128] [--repeat 5]

Shapes match a desk-scale run (n = 3): the Duhamel sweep over M + 1 time
nodes with 3 components, the batched weighted norm and the Leray projection
on every node. The first numba call (compilation, or loading the on-disk
cache) is excluded from the timings. Also checks that the two backends agree.
"""

import argparse
import timeit

import numpy as np

from fracboussinesq import _kernels


def cases(N, M, rng):
    P = N ** 3
    f = rng.standard_normal((M + 1, 3, P)) + 1j * rng.standard_normal((M + 1, 3, P))
    phi0, a, b = rng.uniform(0, 1, (3, P))
    w = rng.uniform(0, 2, P)
    xi = rng.standard_normal((3, P))
    inv_k2 = 1.0 / np.sum(xi ** 2, axis=0)
    return {
        "etd2_sweep": (f, phi0, a, b),
        "weighted_sq_sum": (f, w),
        "leray": (f, xi, inv_k2),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", type=int, default=32)
    p.add_argument("--M", type=int, default=128)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    _kernels.set_threads(args.threads)

    rng = np.random.default_rng(0)
    print(f"N = {args.N}, M = {args.M}, threads = {args.threads}, best of {args.repeat}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max diff':>12}")
    for name, inputs in cases(args.N, args.M, rng).items():
        slow = getattr(_kernels, name + "_numpy")
        fast = getattr(_kernels, name + "_numba")
        ref, got = slow(*inputs), fast(*inputs)
        diff = float(np.max(np.abs(got - ref)) / max(np.max(np.abs(ref)), 1e-300))
        t_slow = min(timeit.repeat(lambda: slow(*inputs), number=1, repeat=args.repeat))
        t_fast = min(timeit.repeat(lambda: fast(*inputs), number=1, repeat=args.repeat))
        print(f"{name:<18}{1e3 * t_slow:>12.2f}{1e3 * t_fast:>12.2f}{t_slow / t_fast:>10.2f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
