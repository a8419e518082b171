"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Compilation happens once before timing. Setting WFUSION_DISABLE_JIT=1 makes
both columns run the numpy code.
"""

import argparse
import math
import time

import numpy as np

from wfusion import _accel, kernels
from wfusion.cavity import CavityParams, coupling_operator, lambda_from
from wfusion.pipeline import StrategyConfig, build_chain


def rk4_case():
    g = 2 * math.pi * 24e3
    params = CavityParams(g=g, delta=10 * g)
    X = coupling_operator(params.n_max)
    psi0 = np.zeros((params.dim, 8), dtype=np.complex128)
    psi0[np.arange(8) * (params.n_max + 1), np.arange(8)] = 1.0
    h = 2 * math.pi / params.delta / 64
    steps = math.ceil(lambda_from(params).interaction_time / h)
    return lambda jit: kernels.rk4_two_tone(X, g, params.delta, psi0, 0.0, h, steps, jit=jit)


def walk_case(walkers=100_000):
    chain = build_chain(StrategyConfig(6, recycle=True))
    cum, nxt = chain.tables()
    u = np.random.default_rng(0).random((walkers, 16))

    def run(jit):
        arrays = [np.zeros(walkers, np.int64) for _ in range(4)]
        arrays += [np.full(walkers, -1, np.int64), np.zeros(walkers, bool)]
        counts = np.zeros(cum.shape, np.int64)
        kernels.walk_chunk(u, cum, nxt, chain.cost, chain.ancilla, 0, 0, *arrays, counts, jit=jit)
        return counts

    return run


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    print(f"numba available: {_accel.HAVE_NUMBA}, jit enabled: {_accel.USE_JIT}")
    print(f"{'kernel':<28}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, case in (("rk4 8 columns, delta=10g", rk4_case()), ("walker 1e5 x 16 draws", walk_case())):
        case(True)  # compile
        t_jit = best_of(lambda: case(True), args.repeat)
        t_np = best_of(lambda: case(False), args.repeat)
        print(f"{name:<28}{t_jit:>12.4f}{t_np:>12.4f}{t_np / t_jit:>9.1f}x")


if __name__ == "__main__":
    main()
