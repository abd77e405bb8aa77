"""k-color configurations on the clique and their one-step analytics.

The global state of the system is a *configuration*: a vector of counts
``(c_1, ..., c_k)`` with ``sum(c_j) == n``, recording how many of the n
anonymous nodes currently hold each color.  Under the 3-majority dynamics a
node resamples three uniform nodes (with replacement, itself included) and
adopts the majority color of the sample, so the probability that a single
node picks color j next round is

    p_j = (c_j / n^3) * (n^2 + n*c_j - sum_h c_h^2)

and the expected next count is ``mu_j = n * p_j``.

This module also exposes the derived *bias statistics* of a configuration:

    m      = max_j c_j                       (plurality count)
    M      = argmax set                      (majority_set)
    s      = m - second largest count        (0 on ties; the bias)
    alpha  = (n - m) * s / n^2
    gamma  = (n*m - sum_h c_h^2) / n^2 - alpha

``alpha`` and ``gamma`` are the normalized drift components of the one-step
expectation: the plurality count satisfies ``mu_m = c_m * (1 + gamma + alpha)``
whenever the maximum is unique.

All count arithmetic is done on Python integers (arbitrary precision), so
``sum c_h^2`` cannot overflow even for n near 2^31 and k in the dozens;
only the final division by a power of n produces a float.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "Configuration",
    "BiasStats",
    "new_configuration",
    "bias_stats",
    "pick_probabilities_3maj",
    "expected_next_3maj",
    "expected_next_decomposed",
    "minority_expectation_bounds",
    "is_s_biased",
    "monochromatic_color",
]

# Largest admissible node total: counts must sum into a signed 64-bit value.
MAX_NODES = 2**63 - 1


@dataclass(frozen=True)
class Configuration:
    """Immutable k-color distribution; ``counts[j]`` nodes hold color j."""

    counts: tuple[int, ...]
    n: int
    k: int

    def as_array(self) -> np.ndarray:
        """Counts as an int64 numpy vector (fresh copy, safe to mutate)."""
        return np.array(self.counts, dtype=np.int64)

    def sum_sq(self) -> int:
        """sum_h c_h^2 as an exact Python integer."""
        return sum(c * c for c in self.counts)

    def is_monochromatic(self) -> bool:
        return max(self.counts) == self.n


@dataclass(frozen=True)
class BiasStats:
    """Plurality count, argmax set, bias, and normalized drift components."""

    m: int
    majority_set: frozenset[int]
    s: int
    alpha: float
    gamma: float


def new_configuration(counts: Sequence[int] | Iterable[int] | np.ndarray) -> Configuration:
    """Validate a counts vector and build a :class:`Configuration`.

    Raises ValueError on an empty vector, a negative entry, a zero total,
    or a total that does not fit in 64 bits.
    """
    if isinstance(counts, np.ndarray):
        if counts.ndim != 1:
            raise ValueError("counts must be a 1-d vector")
        if not np.issubdtype(counts.dtype, np.integer):
            raise ValueError("counts must be integers")
        values = [int(c) for c in counts]
    else:
        values = []
        for c in counts:
            if isinstance(c, bool) or not isinstance(c, (int, np.integer)):
                raise ValueError(f"counts must be integers, got {c!r}")
            values.append(int(c))
    if not values:
        raise ValueError("counts must be non-empty")
    if any(c < 0 for c in values):
        raise ValueError("counts must be non-negative")
    n = sum(values)
    if n == 0:
        raise ValueError("total node count must be at least 1")
    if n > MAX_NODES:
        raise ValueError("total node count exceeds 64-bit range")
    return Configuration(counts=tuple(values), n=n, k=len(values))


def monochromatic_color(c: Configuration) -> Optional[int]:
    """The single color held by all nodes, or None."""
    for j, cj in enumerate(c.counts):
        if cj == c.n:
            return j
    return None


def bias_stats(c: Configuration) -> BiasStats:
    """Compute m, the argmax set, the bias s, and alpha / gamma.

    The bias s is 0 whenever the maximum is tied (and for k = 1, where no
    second color exists).  gamma is evaluated from the exact integer
    numerator ``n*m - sum c^2 - (n - m)*s``, which is non-negative, so the
    reported float can never dip below zero through rounding.
    """
    counts = c.counts
    n = c.n
    m = max(counts)
    majority = frozenset(j for j, cj in enumerate(counts) if cj == m)
    if c.k == 1 or len(majority) > 1:
        s = 0
    else:
        second = max(cj for j, cj in enumerate(counts) if j not in majority)
        s = m - second
    n_sq = n * n
    num_alpha = (n - m) * s
    num_gamma = n * m - c.sum_sq() - num_alpha
    return BiasStats(
        m=m,
        majority_set=majority,
        s=s,
        alpha=num_alpha / n_sq,
        gamma=num_gamma / n_sq,
    )


def pick_probabilities_3maj(c: Configuration) -> np.ndarray:
    """Per-node color distribution after one 3-majority resampling round.

    Exact integer numerators over n^3; each entry is correctly rounded to
    double precision, the vector is *not* renormalized.
    """
    n = c.n
    ssq = c.sum_sq()
    n_sq = n * n
    n_cubed = n_sq * n
    return np.array([cj * (n_sq + n * cj - ssq) / n_cubed for cj in c.counts], dtype=float)


def expected_next_3maj(c: Configuration) -> np.ndarray:
    """Expected next counts ``mu_j = c_j * (1 + (n*c_j - sum c^2)/n^2)``."""
    n = c.n
    ssq = c.sum_sq()
    n_sq = n * n
    return np.array([cj * (n_sq + n * cj - ssq) / n_sq for cj in c.counts], dtype=float)


def expected_next_decomposed(c: Configuration) -> np.ndarray:
    """Expected next counts through the bias decomposition.

    Uses ``mu_m = c_m (1 + gamma + alpha)`` for the unique plurality color
    and ``mu_j = c_j (1 + gamma + alpha - (m - c_j)/n)`` for the others.
    Requires a unique maximum; raises ValueError on a tie.
    """
    stats = bias_stats(c)
    if len(stats.majority_set) > 1:
        raise ValueError("tied maximum: decomposition needs a unique plurality color")
    n = c.n
    m = stats.m
    drift = stats.gamma + stats.alpha
    out = np.empty(c.k, dtype=float)
    for j, cj in enumerate(c.counts):
        if j in stats.majority_set:
            out[j] = cj * (1.0 + drift)
        else:
            out[j] = cj * (1.0 + drift - (m - cj) / n)
    return out


def minority_expectation_bounds(c: Configuration, color: int) -> tuple[float, float]:
    """Bounds on the expected number of nodes *not* holding the plurality color.

    For a majority color m the expected minority mass ``n - mu_m`` is
    sandwiched as

        (n - c_m) (1 - c_m^2 / n^2)  <=  n - mu_m  <=  (n - c_m) (1 - s c_m / n^2)

    Raises ValueError if ``color`` is not in the argmax set.
    """
    stats = bias_stats(c)
    if color not in stats.majority_set:
        raise ValueError(f"color {color} is not a plurality color")
    n = c.n
    cm = c.counts[color]
    rest = n - cm
    n_sq = n * n
    lower = rest * (n_sq - cm * cm) / n_sq
    upper = rest * (n_sq - stats.s * cm) / n_sq
    return lower, upper


def is_s_biased(c: Configuration, s: int) -> Optional[int]:
    """The unique color whose count exceeds every other by at least s, or None.

    Ties for the maximum never qualify (no *unique* such color exists).
    """
    if s < 0:
        raise ValueError("s must be non-negative")
    if c.k == 1:
        return 0
    m = max(c.counts)
    argmax = [j for j, cj in enumerate(c.counts) if cj == m]
    if len(argmax) > 1:
        return None
    j = argmax[0]
    second = max(cj for i, cj in enumerate(c.counts) if i != j)
    return j if m - second >= s else None
