"""Time the numba and numpy kernels on the same overlap workloads.

    python benchmarks/bench_backends.py --radius 24 --k 8 --repeat 3

Reports the best wall time of each backend and checks that both return the
same counts.
"""

import argparse
import time

import numpy as np

from negdef import FreeAbelian, Heisenberg3, enumerate_balls, kernels, make_group
from negdef.construct import overlap_counts


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_overlaps(table, k, repeat):
    rows = np.arange(table.mu[min(2 * k, table.radius)])
    results = {}
    for name in ("numba", "numpy"):
        fn = getattr(kernels, f"fiber_overlaps_{name}")
        if fn is None:
            continue
        kernels.fiber_overlaps = fn
        overlap_counts(table, k, rows[:10])  # compile / warm up
        results[name] = best_of(lambda: overlap_counts(table, k, rows), repeat)
    return len(rows), results


def bench_membership(table, k, repeat, n=200_000):
    rng = np.random.default_rng(0)
    lo, hi = table.packer.lo, table.packer.hi
    q = table.packer.pack(rng.integers(lo, hi + 1, size=(n, table.group.dim)))
    results = {}
    for name in ("numba", "numpy"):
        fn = getattr(kernels, f"count_in_ball_{name}")
        if fn is None:
            continue
        fn(table.sorted_keys, table.sorted_lengths, q[:10], k)
        results[name] = best_of(lambda: fn(table.sorted_keys, table.sorted_lengths, q, k), repeat)
    return n, results


def show(label, size, results):
    base = results.get("numpy", (None,))[0]
    for name, (secs, out) in results.items():
        speed = f"  x{base / secs:6.1f}" if base else ""
        print(f"{label:28s} {name:6s} {size:>9d} items  {secs * 1e3:9.2f} ms{speed}")
    outs = [np.asarray(o) for _, o in results.values()]
    assert all(np.array_equal(outs[0], o) for o in outs[1:]), "backends disagree"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--radius", type=int, default=24)
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    saved = kernels.fiber_overlaps
    try:
        for label, spec in (("heisenberg3", Heisenberg3()), ("free_abelian(2)", FreeAbelian(2))):
            table = enumerate_balls(make_group(spec), args.radius)
            show(f"{label} overlaps k={args.k}", *bench_overlaps(table, args.k, args.repeat))
            show(f"{label} membership", *bench_membership(table, args.k, args.repeat))
    finally:
        kernels.fiber_overlaps = saved


if __name__ == "__main__":
    main()
