#!/usr/bin/env python3
"""Time the jitted kernels against their pure-NumPy/Python fallbacks.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--n 500000] [--repeat 5]

The jitted column is what you get by default; the pure column is what
PHIMP_PURE_NUMPY=1 selects. Outputs are checked to agree while timing.
"""

import argparse
import time

import numpy as np

import phimp._kernels as kernels
from phimp.sources import rng_stream


def best_of(repeat, fn, *args):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def build_cases(n):
    rng = rng_stream(2024)
    table = np.array([[0, 1], [0, 2], [0, 2]], dtype=np.int64)
    symbols = rng.integers(0, 2, n)
    transition = np.array([[0.8, 0.2, 0.0], [0.5, 0.0, 0.5], [0.2, 0.0, 0.8]])
    emission = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    initial = np.array([1.0, 0.0, 0.0])
    uniforms = rng.random(n)
    emit_cdf = np.cumsum(np.array([[0.8, 0.2], [0.5, 0.5], [0.2, 0.8]]), axis=1)
    pattern = np.array([0, 1, 1], dtype=np.int64)
    rollout_table = np.array([[0, 0, 1, 1], [0, 0, 1, 1]], dtype=np.int64)
    policy_cdf = np.cumsum(np.full((2, 2), 0.5), axis=1)
    pair_cdf = np.cumsum(np.full((2, 2, 2), 0.5), axis=2)
    u2 = rng.random(n)
    return {
        "walk_states": (table, 0, symbols),
        "count_path": (table, 0, symbols, symbols, 3, 2),
        "forward_nll_steps": (transition, emission, initial, symbols),
        "sample_symbols": (table, 0, emit_cdf, uniforms),
        "sample_hmm_symbols": (np.cumsum(transition, axis=1),
                               np.cumsum(np.full((3, 2), 0.5), axis=1),
                               0, uniforms, u2),
        "rollout_steps": (rollout_table, 0, policy_cdf, pair_cdf, uniforms, u2, 2, 2),
        "match_positions": (symbols, pattern),
    }


def agreement(a, b) -> bool:
    if isinstance(a, tuple):
        return all(agreement(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, atol=1e-12)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=500_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not kernels.NUMBA_ENABLED:
        print("numba disabled (PHIMP_PURE_NUMPY set); only the pure path exists.")
        return

    kernels.warm_up()
    cases = build_cases(args.n)
    print(f"n = {args.n}, best of {args.repeat} runs\n")
    print(f"{'kernel':<22} {'jitted':>10} {'pure':>10} {'speedup':>9}  agree")
    print("-" * 60)
    for name, case_args in cases.items():
        jit_fn, pure_fn = kernels.IMPL_PAIRS[name]
        t_jit, out_jit = best_of(args.repeat, jit_fn, *case_args)
        t_pure, out_pure = best_of(max(1, args.repeat // 2), pure_fn, *case_args)
        ok = agreement(out_jit, out_pure)
        print(f"{name:<22} {t_jit * 1e3:>8.2f}ms {t_pure * 1e3:>8.2f}ms "
              f"{t_pure / t_jit:>8.1f}x  {ok}")


if __name__ == "__main__":
    main()
