"""Hot inner loops, each in a numba and a pure numpy flavour.

``count_in_ball`` and ``fiber_overlaps`` dispatch on the backend chosen in
:mod:`negdef._backend`; the ``*_numpy`` and ``*_numba`` variants stay
importable so tests and benchmarks can compare them directly.

Fiber layout (see :mod:`negdef.group_core` for the central coordinate): the
ball B_k is stored as ``P`` fibers, fiber j being the set of central values z
with (q_j, z) in B_k, written as disjoint closed runs
``run_lo[run_ptr[j]:run_ptr[j+1]]`` .. ``run_hi[...]``.
"""

import numpy as np

from ._backend import HAVE_NUMBA

# Empty-run sentinels: any overlap computed against them is negative.
_EMPTY_LO = np.int64(1 << 40)
_EMPTY_HI = np.int64(-(1 << 40))


def count_in_ball_numpy(sorted_keys, sorted_lengths, queries, k):
    """Number of query keys present in the table with word length <= k."""
    if len(sorted_keys) == 0 or len(queries) == 0:
        return 0
    pos = np.searchsorted(sorted_keys, queries)
    pos = np.minimum(pos, len(sorted_keys) - 1)
    hit = (sorted_keys[pos] == queries) & (sorted_lengths[pos] <= k)
    return int(np.count_nonzero(hit))


def fiber_overlaps_numpy(run_ptr, run_lo, run_hi, pair_fiber, pair_phi, t_group, t_c):
    """Overlap counts |s B ∩ B| for every target s = (q_group, c).

    ``pair_fiber[g, j]`` is the fiber index of q_g q_j (-1 if absent) and
    ``pair_phi[g, j]`` the cocycle value phi(q_g, q_j).
    """
    P = len(run_ptr) - 1
    counts = np.zeros(len(t_c), dtype=np.int64)
    if P == 0 or len(t_c) == 0:
        return counts
    nruns = np.diff(run_ptr)
    width = int(nruns.max())
    # Padded (P + 1, width) run tables; row P is the empty fiber.
    pad_lo = np.full((P + 1, width), _EMPTY_LO, dtype=np.int64)
    pad_hi = np.full((P + 1, width), _EMPTY_HI, dtype=np.int64)
    col = np.arange(len(run_lo)) - np.repeat(run_ptr[:-1], nruns)
    row = np.repeat(np.arange(P), nruns)
    pad_lo[row, col] = run_lo
    pad_hi[row, col] = run_hi

    order = np.argsort(t_group, kind="stable")
    groups, starts = np.unique(t_group[order], return_index=True)
    ends = np.append(starts[1:], len(order))
    for g, a, b in zip(groups, starts, ends):
        idx = order[a:b]
        c = t_c[idx]
        j2 = pair_fiber[g]
        j2 = np.where(j2 < 0, P, j2)
        shift = pair_phi[g][:, None] + c[None, :]
        acc = np.zeros(len(c), dtype=np.int64)
        for r1 in range(width):
            lo1 = pad_lo[:P, r1][:, None]
            hi1 = pad_hi[:P, r1][:, None]
            for r2 in range(width):
                lo2 = pad_lo[j2, r2][:, None] - shift
                hi2 = pad_hi[j2, r2][:, None] - shift
                ov = np.minimum(hi1, hi2) - np.maximum(lo1, lo2) + 1
                acc += np.clip(ov, 0, None).sum(axis=0)
        counts[idx] = acc
    return counts


if HAVE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def count_in_ball_numba(sorted_keys, sorted_lengths, queries, k):
        n = len(sorted_keys)
        total = 0
        for i in range(len(queries)):
            q = queries[i]
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) >> 1
                if sorted_keys[mid] < q:
                    lo = mid + 1
                else:
                    hi = mid
            if lo < n and sorted_keys[lo] == q and sorted_lengths[lo] <= k:
                total += 1
        return total

    @njit(cache=True)
    def fiber_overlaps_numba(run_ptr, run_lo, run_hi, pair_fiber, pair_phi, t_group, t_c):
        P = len(run_ptr) - 1
        counts = np.zeros(len(t_c), dtype=np.int64)
        for t in range(len(t_c)):
            g = t_group[t]
            c = t_c[t]
            acc = 0
            for j in range(P):
                j2 = pair_fiber[g, j]
                if j2 < 0:
                    continue
                sh = pair_phi[g, j] + c
                for r1 in range(run_ptr[j], run_ptr[j + 1]):
                    lo1 = run_lo[r1]
                    hi1 = run_hi[r1]
                    for r2 in range(run_ptr[j2], run_ptr[j2 + 1]):
                        lo = max(lo1, run_lo[r2] - sh)
                        hi = min(hi1, run_hi[r2] - sh)
                        if hi >= lo:
                            acc += hi - lo + 1
            counts[t] = acc
        return counts

    count_in_ball = count_in_ball_numba
    fiber_overlaps = fiber_overlaps_numba
else:
    count_in_ball_numba = None
    fiber_overlaps_numba = None
    count_in_ball = count_in_ball_numpy
    fiber_overlaps = fiber_overlaps_numpy
