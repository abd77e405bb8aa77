"""3-input recoloring rules, their classification, and exact pick distributions.

A 3-input dynamics is given by a function ``f: [k]^3 -> [k]`` with
``f(x1, x2, x3) in {x1, x2, x3}``: a node resamples three uniform nodes and
recolors itself with ``f`` of the sampled colors.  Four rule kinds are
supported:

* ``3maj``        -- plurality of the sample; an all-distinct triple is
                     broken uniformly at random (the canonical variant for
                     distribution computations),
* ``3maj-first``  -- plurality of the sample; an all-distinct triple keeps
                     the first sampled color,
* ``median``      -- the median of the three color indices,
* ``table``       -- an explicit k^3 lookup table.

Two structural properties classify a rule:

* clear-majority: whenever two of the three inputs agree the rule returns
  the repeated color;
* uniform: over the 6 orderings of any three distinct colors each color is
  returned exactly twice (the delta counters are (2, 2, 2)).

Rules with both properties form the 3-majority equivalence class; the
median rule has the first property but not the second, which is what makes
it fail plurality consensus on 3+ colors.

The module also computes exact per-node pick distributions: by triple
enumeration for 3-input rules (integer arithmetic over 3*n^3) and by
multiset enumeration with multinomial weights for the h-sample plurality
rule (exact rationals, tie mass split evenly over the argmax set).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations
from typing import Iterator, Optional

import numpy as np

from .coloring import Configuration

__all__ = [
    "Rule3",
    "DeltaCounters",
    "Classification",
    "EnumerationLimitError",
    "RuleParseError",
    "three_majority",
    "three_majority_first",
    "median_rule",
    "table_rule",
    "table_rule_from_entries",
    "skewed_tiebreak_rule",
    "builtin_rule",
    "delta_counters",
    "has_clear_majority_property",
    "has_uniform_property",
    "classify",
    "pick_probabilities_rule",
    "pick_probabilities_hmaj",
    "parse_rule",
    "serialize_rule",
    "compositions",
]

KIND_3MAJ = "3maj"
KIND_3MAJ_FIRST = "3maj-first"
KIND_MEDIAN = "median"
KIND_TABLE = "table"

BUILTIN_NAMES = (KIND_3MAJ, KIND_3MAJ_FIRST, KIND_MEDIAN, "skew132")

# Enumeration guards: triple enumeration is O(k^3), multiset enumeration is
# C(h+k-1, k-1); both only make sense at desk scale.
DEFAULT_TABLE_K_CAP = 64
DEFAULT_MULTISET_CAP = 200_000


class EnumerationLimitError(ValueError):
    """Exact enumeration would exceed the configured cap."""


class RuleParseError(ValueError):
    """A rule file does not conform to the text format."""


@dataclass(frozen=True, eq=False)
class Rule3:
    """A 3-input rule; ``table`` and ``k`` are set for table rules only."""

    kind: str
    k: Optional[int] = None
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == KIND_TABLE:
            if self.table is None or self.k is None:
                raise ValueError("table rules need an explicit table and k")
        elif self.kind not in (KIND_3MAJ, KIND_3MAJ_FIRST, KIND_MEDIAN):
            raise ValueError(f"unknown rule kind {self.kind!r}")

    @property
    def randomized(self) -> bool:
        """True when evaluation on some triple needs a tie-break draw."""
        return self.kind == KIND_3MAJ

    def eval(self, triple: tuple[int, int, int], rng: Optional[np.random.Generator] = None) -> int:
        """Apply the rule to one ordered color triple.

        ``3maj`` needs ``rng`` on an all-distinct triple (uniform tie-break);
        all other cases are deterministic.
        """
        x1, x2, x3 = (int(x) for x in triple)
        if min(x1, x2, x3) < 0:
            raise ValueError("colors must be non-negative")
        if self.kind == KIND_TABLE:
            if max(x1, x2, x3) >= self.k:
                raise ValueError(f"color out of range for k={self.k} table rule")
            return int(self.table[x1, x2, x3])
        if self.kind == KIND_MEDIAN:
            return sorted((x1, x2, x3))[1]
        if x1 == x2 or x1 == x3:
            return x1
        if x2 == x3:
            return x2
        if self.kind == KIND_3MAJ_FIRST:
            return x1
        if rng is None:
            raise ValueError("uniform tie-break on a distinct triple needs an rng")
        return (x1, x2, x3)[rng.integers(3)]

    def eval_distribution(self, triple: tuple[int, int, int]) -> dict[int, Fraction]:
        """Outcome distribution on one ordered triple (exact rationals)."""
        x1, x2, x3 = triple
        if self.kind == KIND_3MAJ and x1 != x2 and x1 != x3 and x2 != x3:
            third = Fraction(1, 3)
            return {x1: third, x2: third, x3: third}
        return {self.eval(triple): Fraction(1)}


def three_majority() -> Rule3:
    """Plurality of 3 with uniform tie-breaking (works for any k)."""
    return Rule3(kind=KIND_3MAJ)


def three_majority_first() -> Rule3:
    """Plurality of 3 keeping the first sample on an all-distinct triple."""
    return Rule3(kind=KIND_3MAJ_FIRST)


def median_rule() -> Rule3:
    """Median of the three sampled color indices."""
    return Rule3(kind=KIND_MEDIAN)


def table_rule(table: np.ndarray) -> Rule3:
    """Build a rule from an explicit (k, k, k) lookup table.

    Every entry must be one of its own triple's colors.
    """
    table = np.asarray(table)
    if table.ndim != 3 or len(set(table.shape)) != 1:
        raise ValueError("table must have shape (k, k, k)")
    k = table.shape[0]
    if k < 1 or k > DEFAULT_TABLE_K_CAP:
        raise ValueError(f"table size k={k} outside [1, {DEFAULT_TABLE_K_CAP}]")
    table = table.astype(np.int64)
    for x1 in range(k):
        for x2 in range(k):
            for x3 in range(k):
                y = int(table[x1, x2, x3])
                if y not in (x1, x2, x3):
                    raise ValueError(
                        f"entry f({x1},{x2},{x3})={y} is not one of its inputs"
                    )
    table.setflags(write=False)
    return Rule3(kind=KIND_TABLE, k=k, table=table)


def table_rule_from_entries(k: int, entries: dict[tuple[int, int, int], int]) -> Rule3:
    """Table rule equal to ``3maj-first`` except on the listed triples."""
    base = three_majority_first()
    table = np.empty((k, k, k), dtype=np.int64)
    for x1 in range(k):
        for x2 in range(k):
            for x3 in range(k):
                table[x1, x2, x3] = base.eval((x1, x2, x3))
    for (x1, x2, x3), y in entries.items():
        if not (0 <= x1 < k and 0 <= x2 < k and 0 <= x3 < k):
            raise ValueError(f"triple {(x1, x2, x3)} out of range for k={k}")
        table[x1, x2, x3] = y
    return table_rule(table)


def skewed_tiebreak_rule() -> Rule3:
    """3-color clear-majority rule whose distinct-triple outcomes favor color 1.

    Over the 6 orderings of (0, 1, 2) the outcomes are split (1, 3, 2):
    color 0 wins once, color 1 three times, color 2 twice.  Despite color 0
    holding the initial plurality, the process drifts to color 1 from a
    (n/3 + s, n/3, n/3 - s) start.
    """
    return table_rule_from_entries(
        3,
        {
            (0, 1, 2): 0,
            (0, 2, 1): 1,
            (1, 0, 2): 1,
            (1, 2, 0): 1,
            (2, 0, 1): 2,
            (2, 1, 0): 2,
        },
    )


def builtin_rule(name: str) -> Rule3:
    """Look up a built-in rule by CLI name."""
    if name == KIND_3MAJ:
        return three_majority()
    if name == KIND_3MAJ_FIRST:
        return three_majority_first()
    if name == KIND_MEDIAN:
        return median_rule()
    if name == "skew132":
        return skewed_tiebreak_rule()
    raise ValueError(f"unknown built-in rule {name!r} (expected one of {BUILTIN_NAMES})")


@dataclass(frozen=True)
class DeltaCounters:
    """Outcome counts of a rule over the 6 orderings of 3 distinct colors."""

    delta_r: int
    delta_g: int
    delta_b: int

    def __post_init__(self):
        total = self.delta_r + self.delta_g + self.delta_b
        if total != 6:
            raise ValueError(f"delta counters must sum to 6, got {total}")
        for d in (self.delta_r, self.delta_g, self.delta_b):
            if not 0 <= d <= 6:
                raise ValueError("each delta counter must lie in [0, 6]")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.delta_r, self.delta_g, self.delta_b)


def delta_counters(rule: Rule3, r: int, g: int, b: int) -> DeltaCounters:
    """Count how often each of 3 distinct colors wins over all 6 orderings.

    For the uniform-tie-break rule the (integer) expected counts are used;
    they are always (2, 2, 2).
    """
    if len({r, g, b}) != 3:
        raise ValueError("colors must be pairwise distinct")
    acc = {r: Fraction(0), g: Fraction(0), b: Fraction(0)}
    for triple in permutations((r, g, b)):
        for y, frac in rule.eval_distribution(triple).items():
            acc[y] += frac
    values = []
    for color in (r, g, b):
        v = acc[color]
        if v.denominator != 1:
            raise ValueError("fractional delta counter")  # unreachable for supported kinds
        values.append(int(v))
    return DeltaCounters(*values)


def has_clear_majority_property(rule: Rule3, k: int) -> tuple[bool, Optional[tuple[int, int, int]]]:
    """Check the clear-majority property over all triples with a repeat.

    Returns the flag and, on failure, the lexicographically first violating
    triple.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if rule.kind == KIND_TABLE and k > rule.k:
        raise ValueError(f"rule is only defined for k={rule.k}")
    for x1 in range(k):
        for x2 in range(k):
            for x3 in range(k):
                if x1 != x2 and x1 != x3 and x2 != x3:
                    continue
                majority = x1 if (x1 == x2 or x1 == x3) else x2
                if rule.eval((x1, x2, x3)) != majority:
                    return False, (x1, x2, x3)
    return True, None


def has_uniform_property(rule: Rule3, k: int) -> tuple[bool, Optional[tuple[int, int, int]]]:
    """Check the uniform property (all delta counters equal 2).

    Vacuously true for k < 3.  On failure returns the first distinct triple
    (sorted, lexicographic order) whose counters are not (2, 2, 2).
    """
    if rule.kind == KIND_TABLE and k > rule.k:
        raise ValueError(f"rule is only defined for k={rule.k}")
    if k < 3:
        return True, None
    for r, g, b in combinations(range(k), 3):
        if delta_counters(rule, r, g, b).as_tuple() != (2, 2, 2):
            return False, (r, g, b)
    return True, None


@dataclass(frozen=True)
class Classification:
    """Result of the exhaustive rule classification at a given k."""

    kind: str
    k: int
    clear_majority: bool
    clear_majority_counterexample: Optional[tuple[int, int, int]]
    uniform: bool
    uniform_counterexample: Optional[tuple[int, int, int]]
    in_m3: bool

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "clear_majority": self.clear_majority,
            "clear_majority_counterexample": self.clear_majority_counterexample,
            "uniform": self.uniform,
            "uniform_counterexample": self.uniform_counterexample,
            "in_m3": self.in_m3,
        }


def classify(rule: Rule3, k: int) -> Classification:
    """Exhaustively test both properties and the 3-majority class membership."""
    cm, cm_ex = has_clear_majority_property(rule, k)
    un, un_ex = has_uniform_property(rule, k)
    return Classification(
        kind=rule.kind,
        k=k,
        clear_majority=cm,
        clear_majority_counterexample=cm_ex,
        uniform=un,
        uniform_counterexample=un_ex,
        in_m3=cm and un,
    )


def pick_probabilities_rule(
    rule: Rule3, c: Configuration, k_cap: int = DEFAULT_TABLE_K_CAP
) -> np.ndarray:
    """Exact per-node pick distribution of a 3-input rule on a configuration.

    Enumerates ordered triples split by pattern (all equal / exactly two
    equal / all distinct) over the support of the configuration, O(k^3)
    worst case.  Accumulation is integer-exact in units of 1/(3 n^3); each
    output entry is a correctly rounded double.
    """
    k = c.k
    if k > k_cap:
        raise EnumerationLimitError(f"k={k} exceeds enumeration cap {k_cap}")
    if rule.kind == KIND_TABLE and rule.k != k:
        raise ValueError(f"rule is defined for k={rule.k}, configuration has k={k}")
    counts = c.counts
    n = c.n
    support = [j for j in range(k) if counts[j] > 0]
    num3 = [0] * k  # numerators in units of 1/(3 n^3)

    for a in support:
        num3[a] += 3 * counts[a] ** 3

    for a in support:
        ca = counts[a]
        for b in support:
            if b == a:
                continue
            w = ca * ca * counts[b]
            for triple in ((a, a, b), (a, b, a), (b, a, a)):
                for y, frac in rule.eval_distribution(triple).items():
                    num3[y] += w * int(3 * frac)

    for a, b, d in combinations(support, 3):
        w = counts[a] * counts[b] * counts[d]
        for triple in permutations((a, b, d)):
            for y, frac in rule.eval_distribution(triple).items():
                num3[y] += w * int(3 * frac)

    denom = 3 * n**3
    assert sum(num3) == denom
    return np.array([v / denom for v in num3], dtype=float)


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All weak compositions of ``total`` into ``parts`` parts, lexicographic."""
    if parts < 1:
        raise ValueError("parts must be at least 1")
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def pick_probabilities_hmaj(
    h: int, c: Configuration, multiset_cap: int = DEFAULT_MULTISET_CAP
) -> np.ndarray:
    """Exact pick distribution of h-sample plurality with uniform tie-break.

    Sums the multinomial weight of every sample multiset, splitting tied
    multisets evenly over their argmax colors (exact rationals throughout).
    Raises :class:`EnumerationLimitError` when the multiset count
    C(h+k-1, k-1) exceeds the cap; callers should fall back to agent
    sampling in that case.
    """
    if h < 1:
        raise ValueError("h must be at least 1")
    k = c.k
    if math.comb(h + k - 1, k - 1) > multiset_cap:
        raise EnumerationLimitError(
            f"C({h + k - 1},{k - 1}) multisets exceed cap {multiset_cap}"
        )
    counts = c.counts
    n = c.n
    support = [j for j in range(k) if counts[j] > 0]
    acc = [Fraction(0)] * k
    for comp in compositions(h, len(support)):
        w = math.factorial(h)
        for m in comp:
            w //= math.factorial(m)
        for j, m in zip(support, comp):
            w *= counts[j] ** m
        mx = max(comp)
        winners = [support[i] for i, m in enumerate(comp) if m == mx]
        share = Fraction(w, len(winners))
        for j in winners:
            acc[j] += share
    denom = n**h
    return np.array([float(v / denom) for v in acc], dtype=float)


# --- rule text format ------------------------------------------------------
#
#   k=<int>
#   x1 x2 x3 -> y
#
# Unlisted triples default to the 3maj-first behavior.  Blank lines and
# lines starting with '#' are ignored.


def parse_rule(text: str) -> Rule3:
    """Parse the table-rule text format; raises :class:`RuleParseError`."""
    lines = [
        (i + 1, line.strip())
        for i, line in enumerate(text.splitlines())
        if line.strip() and not line.strip().startswith("#")
    ]
    if not lines:
        raise RuleParseError("empty rule file")
    lineno, header = lines[0]
    if not header.startswith("k="):
        raise RuleParseError(f"line {lineno}: expected header 'k=<int>', got {header!r}")
    try:
        k = int(header[2:])
    except ValueError:
        raise RuleParseError(f"line {lineno}: invalid k value {header[2:]!r}") from None
    if k < 2 or k > DEFAULT_TABLE_K_CAP:
        raise RuleParseError(f"line {lineno}: k={k} outside [2, {DEFAULT_TABLE_K_CAP}]")
    entries: dict[tuple[int, int, int], int] = {}
    for lineno, line in lines[1:]:
        if "->" not in line:
            raise RuleParseError(f"line {lineno}: expected 'x1 x2 x3 -> y', got {line!r}")
        left, _, right = line.partition("->")
        try:
            xs = tuple(int(tok) for tok in left.split())
            y = int(right.strip())
        except ValueError:
            raise RuleParseError(f"line {lineno}: non-integer color in {line!r}") from None
        if len(xs) != 3:
            raise RuleParseError(f"line {lineno}: expected exactly 3 input colors")
        if any(not 0 <= x < k for x in xs) or not 0 <= y < k:
            raise RuleParseError(f"line {lineno}: color out of range for k={k}")
        if y not in xs:
            raise RuleParseError(f"line {lineno}: output {y} is not one of the inputs")
        if xs in entries:
            raise RuleParseError(f"line {lineno}: duplicate triple {xs}")
        entries[xs] = y
    try:
        return table_rule_from_entries(k, entries)
    except ValueError as exc:
        raise RuleParseError(str(exc)) from None


def serialize_rule(rule: Rule3) -> str:
    """Serialize a table rule, listing only entries that differ from 3maj-first."""
    if rule.kind != KIND_TABLE:
        raise ValueError("only table rules can be serialized")
    base = three_majority_first()
    out = [f"k={rule.k}"]
    for x1 in range(rule.k):
        for x2 in range(rule.k):
            for x3 in range(rule.k):
                y = int(rule.table[x1, x2, x3])
                if y != base.eval((x1, x2, x3)):
                    out.append(f"{x1} {x2} {x3} -> {y}")
    return "\n".join(out) + "\n"
