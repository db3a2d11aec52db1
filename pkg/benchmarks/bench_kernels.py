"""Time the numba kernels against their numpy counterparts.

Run with ``python benchmarks/bench_kernels.py``. Inputs are step-cost
tables from random noisy SM instances, so the searches see realistic
expansion counts. Both paths are timed in the same process.
"""

import argparse
import statistics
import time

import numpy as np

from smtree import kernels
from smtree.core import ChannelPair, build_qam, enumerate_candidates, sample_channel, sample_noise


def make_tables(n, M, N_t, N_r, snr_db, seed):
    rng = np.random.default_rng(seed)
    c = build_qam(M)
    out = []
    for _ in range(n):
        h = sample_channel(rng, N_r, N_t)
        X = enumerate_candidates(ChannelPair(h, h), c).vectors
        y = X[:, rng.integers(M * N_t)] + sample_noise(rng, N_r, 10 ** (-snr_db / 10))
        out.append(kernels.step_costs(y, X))
    return out


def time_kernel(fn, tables, repeat):
    """Median seconds per call over ``repeat`` passes."""
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for t in tables:
            fn(t)
        runs.append((time.perf_counter() - t0) / len(tables))
    return statistics.median(runs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=300)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if kernels.best_first_numba is None:
        raise SystemExit("numba is disabled (SMTREE_DISABLE_NUMBA set or numba missing)")

    empty = np.empty(0, dtype=np.int64)
    pairs = {
        "best_first": (
            lambda t: kernels.best_first_numba(t, False, empty),
            lambda t: kernels.best_first_numpy(t, False, empty),
        ),
        "exhaustive": (kernels.exhaustive_numba, kernels.exhaustive_numpy),
        "census": (lambda t: kernels.census_numba(t, 1.0), lambda t: kernels.census_numpy(t, 1.0)),
    }
    shapes = [(8, 8, 8, 10.0), (8, 8, 8, 30.0), (16, 16, 16, 10.0), (16, 16, 64, 20.0)]

    print(f"{'kernel':<11} {'M x N_t x N_r':<14} {'snr':>4} {'numba us':>10} {'numpy us':>10} {'speedup':>8}")
    for M, N_t, N_r, snr in shapes:
        tables = make_tables(args.instances, M, N_t, N_r, snr, args.seed)
        for name, (fast, slow) in pairs.items():
            fast(tables[0])  # compile outside the timed region
            t_fast = time_kernel(fast, tables, args.repeat)
            t_slow = time_kernel(slow, tables, args.repeat)
            print(
                f"{name:<11} {f'{M}x{N_t}x{N_r}':<14} {snr:>4.0f} "
                f"{1e6 * t_fast:>10.2f} {1e6 * t_slow:>10.2f} {t_slow / t_fast:>8.1f}"
            )


if __name__ == "__main__":
    main()
