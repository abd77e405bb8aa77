#!/usr/bin/env python3
"""Benchmark the agent-sampling kernels: numba backend vs pure-numpy fallback.

The agent path dominates runtime whenever the exact pick distribution is out
of reach (large-h plurality, in particular), so this measures exactly the
loops that PLURALITYSIM_NO_NUMBA toggles.  The multinomial engine is timed
alongside as the baseline the auto engine prefers.

Usage: python benchmarks/bench_step.py [--n 100000] [--reps 30]
"""

import argparse
import time

import numpy as np

from pluralitysim import _kernels_numpy
from pluralitysim.engine import Dynamics, exact_pick_probabilities
from pluralitysim.engine import gen_balanced_biased

try:
    from pluralitysim import _kernels_numba

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False
    print("numba unavailable: benchmarking the numpy fallback only")


def time_fn(fn, reps):
    fn()  # warm-up (and JIT compile for the numba path)
    start = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - start) / reps


def bench(n, reps):
    cases = []
    for k, h in [(8, 5), (32, 5), (32, 9), (64, 9)]:
        counts = gen_balanced_biased(n, k, 0).as_array()
        cases.append((f"hmaj  k={k:<3} h={h}", "hmaj", counts, h))
    from pluralitysim.rules import skewed_tiebreak_rule

    table = skewed_tiebreak_rule().table.ravel()
    counts3 = gen_balanced_biased(n, 3, 0).as_array()
    cases.append(("table k=3   3-input", "table", counts3, table))
    cases.append(("3maj  k=32  builtin", "builtin", gen_balanced_biased(n, 32, 0).as_array(), 0))

    header = f"{'kernel':<22} {'numpy':>12}"
    if HAVE_NUMBA:
        header += f" {'numba':>12} {'speedup':>9}"
    print(f"agent-step benchmark: n={n}, {reps} reps per point")
    print(header)
    print("-" * len(header))
    for label, kind, counts, arg in cases:
        def run(mod, kind=kind, counts=counts, arg=arg):
            rng = np.random.default_rng(1)
            if kind == "hmaj":
                return lambda: mod.step_hmaj(counts, arg, rng)
            if kind == "table":
                k = int(round(len(arg) ** (1 / 3)))
                return lambda: mod.step_table(counts, arg, k, rng)
            return lambda: mod.step_builtin(counts, arg, rng)

        t_np = time_fn(run(_kernels_numpy), reps)
        line = f"{label:<22} {t_np * 1e3:>10.2f}ms"
        if HAVE_NUMBA:
            t_nb = time_fn(run(_kernels_numba), reps)
            line += f" {t_nb * 1e3:>10.2f}ms {t_np / t_nb:>8.1f}x"
        print(line)

    # multinomial engine baseline (exact pick distribution available)
    counts = gen_balanced_biased(n, 32, 1000)
    d = Dynamics.from_rule(__import__("pluralitysim").three_majority())
    p = exact_pick_probabilities(d, counts)
    rng = np.random.default_rng(2)
    t = time_fn(lambda: rng.multinomial(n, p / p.sum()), reps)
    print(f"\nmultinomial engine (3maj k=32): {t * 1e6:.1f}us per round")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=100_000)
    parser.add_argument("--reps", type=int, default=30)
    args = parser.parse_args()
    bench(args.n, args.reps)
