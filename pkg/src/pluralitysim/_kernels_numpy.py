"""Pure-numpy agent-sampling kernels (fallback path).

Vectorized twins of :mod:`pluralitysim._kernels_numba`: same signatures and
the same sampling distribution, different random streams.  Selected via the
``PLURALITYSIM_NO_NUMBA`` environment flag or when numba is unavailable.
"""

import numpy as np

CODE_3MAJ = 0
CODE_3MAJ_FIRST = 1
CODE_MEDIAN = 2


def _sample_colors(counts, cum, size, gen):
    u = gen.integers(0, int(cum[-1]), size=size)
    return np.searchsorted(cum, u, side="right")


def step_builtin(counts, code, gen):
    n = int(counts.sum())
    cum = np.cumsum(counts)
    x = _sample_colors(counts, cum, (3, n), gen)
    x1, x2, x3 = x[0], x[1], x[2]
    if code == CODE_MEDIAN:
        y = x1 + x2 + x3 - np.maximum(x1, np.maximum(x2, x3)) - np.minimum(x1, np.minimum(x2, x3))
    else:
        y = np.where(x2 == x3, x2, x1)
        if code == CODE_3MAJ:
            distinct = (x1 != x2) & (x1 != x3) & (x2 != x3)
            idx = np.flatnonzero(distinct)
            if idx.size:
                pick = gen.integers(0, 3, size=idx.size)
                stacked = np.stack((x1[idx], x2[idx], x3[idx]))
                y[idx] = stacked[pick, np.arange(idx.size)]
    return np.bincount(y, minlength=counts.size).astype(counts.dtype)


def step_table(counts, table_flat, k, gen):
    n = int(counts.sum())
    cum = np.cumsum(counts)
    x = _sample_colors(counts, cum, (3, n), gen)
    y = table_flat[(x[0] * k + x[1]) * k + x[2]]
    return np.bincount(y, minlength=counts.size).astype(counts.dtype)


def step_hmaj(counts, h, gen):
    k = counts.size
    n = int(counts.sum())
    cum = np.cumsum(counts)
    x = _sample_colors(counts, cum, (n, h), gen)
    tallies = np.bincount(
        (x + k * np.arange(n)[:, None]).ravel(), minlength=n * k
    ).reshape(n, k)
    # iid U[0,1) jitter: counts are integers, so the max-count color wins and
    # tied colors are chosen uniformly
    winner = np.argmax(tallies + gen.random((n, k)), axis=1)
    return np.bincount(winner, minlength=k).astype(counts.dtype)
