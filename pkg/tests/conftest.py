"""Shared brute-force oracles, independent of the library's code paths.

Everything here enumerates raw node samples (not color patterns) with exact
rational arithmetic, so it is deliberately slow and only usable at tiny
sizes; the library's closed forms and pattern enumerations are tested
against these.
"""

from fractions import Fraction
from itertools import product

import numpy as np
import pytest


def node_colors(counts):
    """Explicit node list for a counts vector, e.g. (2,1) -> [0,0,1]."""
    out = []
    for color, c in enumerate(counts):
        out.extend([color] * c)
    return out


def brute_pick_rule3(counts, outcome_dist):
    """Pick distribution of a 3-input rule by enumerating all n^3 node triples.

    ``outcome_dist(triple) -> {color: Fraction}`` supplies the rule.
    Returns a list of Fractions summing to 1.
    """
    nodes = node_colors(counts)
    n = len(nodes)
    acc = [Fraction(0)] * len(counts)
    for trip in product(nodes, repeat=3):
        for y, f in outcome_dist(trip).items():
            acc[y] += f
    total = Fraction(n**3)
    return [a / total for a in acc]


def uniform_tie_majority_dist(triple):
    """3-majority with uniform tie-break, as an outcome distribution."""
    x1, x2, x3 = triple
    if x1 == x2 or x1 == x3:
        return {x1: Fraction(1)}
    if x2 == x3:
        return {x2: Fraction(1)}
    return {x1: Fraction(1, 3), x2: Fraction(1, 3), x3: Fraction(1, 3)}


def first_tie_majority_dist(triple):
    x1, x2, x3 = triple
    if x1 == x2 or x1 == x3:
        return {x1: Fraction(1)}
    if x2 == x3:
        return {x2: Fraction(1)}
    return {x1: Fraction(1)}


def brute_pick_hmaj(counts, h):
    """h-sample plurality with uniform tie-break over all n^h node tuples."""
    nodes = node_colors(counts)
    n = len(nodes)
    k = len(counts)
    acc = [Fraction(0)] * k
    for sample in product(nodes, repeat=h):
        tally = [0] * k
        for c in sample:
            tally[c] += 1
        mx = max(tally)
        winners = [j for j in range(k) if tally[j] == mx]
        share = Fraction(1, len(winners))
        for j in winners:
            acc[j] += share
    total = Fraction(n**h)
    return [a / total for a in acc]


def chi_square_stat(observed, expected_probs, total):
    """Chi-square statistic with small expected bins pooled (exp >= 5)."""
    exp = np.asarray(expected_probs, dtype=float) * total
    obs = np.asarray(observed, dtype=float)
    big = exp >= 5.0
    stat = float(((obs[big] - exp[big]) ** 2 / exp[big]).sum())
    df = int(big.sum()) - 1
    rest_exp = exp[~big].sum()
    if rest_exp > 0:
        rest_obs = obs[~big].sum()
        stat += (rest_obs - rest_exp) ** 2 / rest_exp
        df += 1
    return stat, max(df, 1)


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed):
        return np.random.default_rng(seed)

    return make
