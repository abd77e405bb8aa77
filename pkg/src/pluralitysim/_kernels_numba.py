"""Numba-compiled agent-sampling kernels.

Each kernel advances one synchronous round by letting every node draw its
own samples (colors drawn proportionally to the current counts, i.e.
uniform nodes with replacement) and apply the rule, tallying the new
counts.  Sample indices are bulk-drawn, per-node work stays in compiled
loops; the h-majority tally touches only the <= h colors a node actually
sampled.  The numpy Generator is passed straight into nopython code, so a
seeded run is reproducible for a fixed numba/numpy version.

Signatures mirror :mod:`pluralitysim._kernels_numpy` exactly.
"""

import numpy as np
from numba import njit

# builtin rule codes shared with the dispatcher
CODE_3MAJ = 0
CODE_3MAJ_FIRST = 1
CODE_MEDIAN = 2


@njit(cache=True, inline="always")
def _color_of(cum, u):
    # first index j with u < cum[j]; cum is the inclusive cumsum of counts
    lo = 0
    hi = cum.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if u < cum[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def step_builtin(counts, code, gen):
    n = np.int64(0)
    for j in range(counts.size):
        n += counts[j]
    cum = np.cumsum(counts)
    new = np.zeros_like(counts)
    u = gen.integers(0, n, size=3 * n)
    for i in range(n):
        x1 = _color_of(cum, u[3 * i])
        x2 = _color_of(cum, u[3 * i + 1])
        x3 = _color_of(cum, u[3 * i + 2])
        if x1 == x2 or x1 == x3:
            y = x1
        elif x2 == x3:
            y = x2
        elif code == CODE_3MAJ_FIRST:
            y = x1
        elif code == CODE_MEDIAN:
            hi = max(x1, max(x2, x3))
            lo = min(x1, min(x2, x3))
            y = x1 + x2 + x3 - hi - lo
        else:
            r = gen.integers(0, 3)
            if r == 0:
                y = x1
            elif r == 1:
                y = x2
            else:
                y = x3
        new[y] += 1
    return new


@njit(cache=True)
def step_table(counts, table_flat, k, gen):
    n = np.int64(0)
    for j in range(counts.size):
        n += counts[j]
    cum = np.cumsum(counts)
    new = np.zeros_like(counts)
    u = gen.integers(0, n, size=3 * n)
    for i in range(n):
        x1 = _color_of(cum, u[3 * i])
        x2 = _color_of(cum, u[3 * i + 1])
        x3 = _color_of(cum, u[3 * i + 2])
        new[table_flat[(x1 * k + x2) * k + x3]] += 1
    return new


@njit(cache=True)
def step_hmaj(counts, h, gen):
    k = counts.size
    n = np.int64(0)
    for j in range(k):
        n += counts[j]
    cum = np.cumsum(counts)
    new = np.zeros_like(counts)
    tally = np.zeros(k, dtype=np.int64)
    seen = np.empty(h, dtype=np.int64)
    u = gen.integers(0, n, size=h * n)
    for i in range(n):
        seen_count = 0
        for t in range(h):
            c = _color_of(cum, u[h * i + t])
            if tally[c] == 0:
                seen[seen_count] = c
                seen_count += 1
            tally[c] += 1
        # plurality with a uniform tie-break (reservoir over tied colors),
        # scanning only the colors this node sampled
        best = -1
        best_count = np.int64(0)
        ties = 0
        for t in range(seen_count):
            j = seen[t]
            cj = tally[j]
            if cj > best_count:
                best_count = cj
                best = j
                ties = 1
            elif cj == best_count:
                ties += 1
                if gen.random() * ties < 1.0:
                    best = j
        for t in range(seen_count):
            tally[seen[t]] = 0
        new[best] += 1
    return new
