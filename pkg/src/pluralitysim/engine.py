"""Synchronous round engine, initial generators, adversary, and trial runner.

A *dynamics* is either a 3-input rule or the h-sample plurality rule.  One
synchronous round recolors every node.  Two sampling engines are available:

* ``multinomial`` -- when the exact per-node pick distribution p(c) is
  computable, the next configuration is one multinomial draw of n trials
  over p (valid because nodes sample independently from the same counts).
  numpy's multinomial is the k-1 conditional-binomial chain, O(k) per round.
* ``agent``       -- every node draws its own samples and applies the rule
  (numba or numpy kernel); the honest fallback when exact enumeration is
  out of reach.

``engine="auto"`` prefers the multinomial path and falls back to agent
sampling.  Trials are deterministic given (initial configuration, dynamics,
adversary, max_rounds, seed); per-trial seeds come from a SplitMix64 mix of
the master seed and the trial counter, so trial-level parallelism cannot
change results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from . import kernels
from .coloring import (
    Configuration,
    bias_stats,
    is_s_biased,
    monochromatic_color,
    new_configuration,
    pick_probabilities_3maj,
)
from .rules import (
    KIND_3MAJ,
    KIND_3MAJ_FIRST,
    KIND_MEDIAN,
    KIND_TABLE,
    Rule3,
    compositions,
)

__all__ = [
    "Dynamics",
    "AdversaryPolicy",
    "TrialResult",
    "exact_pick_probabilities",
    "step",
    "apply_adversary",
    "run_trial",
    "rounds_until_count",
    "sample_next_counts",
    "absorption_ensemble",
    "gen_balanced_biased",
    "gen_three_color_lb",
    "gen_power_biased",
    "derive_trial_seed",
    "default_max_rounds",
]

# Practical ceiling on the engine's per-round exact h-majority enumeration.
ENGINE_MULTISET_CAP = 50_000

ENGINES = ("auto", "multinomial", "agent")


@dataclass(frozen=True, eq=False)
class Dynamics:
    """Either a 3-input rule or h-sample plurality (exactly one is set)."""

    rule: Optional[Rule3] = None
    h: Optional[int] = None

    def __post_init__(self):
        if (self.rule is None) == (self.h is None):
            raise ValueError("specify exactly one of rule / h")
        if self.h is not None and self.h < 1:
            raise ValueError("h must be at least 1")

    @staticmethod
    def from_rule(rule: Rule3) -> "Dynamics":
        return Dynamics(rule=rule)

    @staticmethod
    def h_majority(h: int) -> "Dynamics":
        return Dynamics(h=h)

    def describe(self) -> str:
        if self.h is not None:
            return f"hmaj:{self.h}"
        return self.rule.kind


@dataclass(frozen=True)
class AdversaryPolicy:
    """T-bounded adversary: recolors at most ``budget`` nodes before a round.

    Strategies: ``"none"``, ``"demote_majority"`` (move up to T nodes from
    the plurality color to the runner-up, ties broken by lowest index), or a
    callable hook ``(counts_array, budget) -> counts_array``.
    """

    budget: int = 0
    strategy: str | Callable[[np.ndarray, int], np.ndarray] = "none"

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if isinstance(self.strategy, str) and self.strategy not in ("none", "demote_majority"):
            raise ValueError(f"unknown adversary strategy {self.strategy!r}")

    @staticmethod
    def none() -> "AdversaryPolicy":
        return AdversaryPolicy(budget=0, strategy="none")

    @staticmethod
    def demote(budget: int) -> "AdversaryPolicy":
        return AdversaryPolicy(budget=budget, strategy="demote_majority")

    def describe(self) -> str:
        if callable(self.strategy):
            return f"custom:{self.budget}"
        if self.strategy == "none":
            return "none"
        return f"demote:{self.budget}"


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one simulated run."""

    converged: bool
    winner: Optional[int]
    rounds: int
    reached_majority: bool
    trajectory: Optional[tuple[tuple[int, int, int], ...]] = None


def apply_adversary(c: Configuration, policy: AdversaryPolicy) -> Configuration:
    """Apply the adversary's recoloring; at most ``budget`` nodes move."""
    if policy.strategy == "none" or policy.budget == 0:
        return c
    if callable(policy.strategy):
        before = c.as_array()
        after = np.asarray(policy.strategy(before.copy(), policy.budget), dtype=np.int64)
        if after.shape != before.shape or after.min() < 0 or int(after.sum()) != c.n:
            raise ValueError("adversary hook must preserve n and non-negativity")
        moved = int(np.maximum(after - before, 0).sum())
        if moved > policy.budget:
            raise ValueError(f"adversary hook moved {moved} nodes, budget is {policy.budget}")
        return new_configuration(after)
    # demote_majority
    counts = list(c.counts)
    m = max(counts)
    plurality = counts.index(m)
    runner = max(
        (j for j in range(c.k) if j != plurality),
        key=lambda j: (counts[j], -j),
        default=None,
    )
    if runner is None:
        return c
    moved = min(policy.budget, counts[plurality])
    counts[plurality] -= moved
    counts[runner] += moved
    return new_configuration(counts)


def _median_pick_probabilities(c: Configuration) -> np.ndarray:
    # sample-median CDF: P(med <= j) = F^2 (3 - 2F) with F the count CDF
    f = np.cumsum(c.as_array()) / c.n
    g = f * f * (3.0 - 2.0 * f)
    p = np.empty(c.k)
    p[0] = g[0]
    p[1:] = np.diff(g)
    return np.clip(p, 0.0, None)


def _table_pick_probabilities(rule: Rule3, c: Configuration) -> np.ndarray:
    q = c.as_array() / c.n
    w = np.einsum("i,j,l->ijl", q, q, q).ravel()
    return np.bincount(rule.table.ravel(), weights=w, minlength=c.k)


_COMP_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _composition_matrix(h: int, parts: int) -> np.ndarray:
    key = (h, parts)
    mat = _COMP_CACHE.get(key)
    if mat is None:
        mat = np.array(list(compositions(h, parts)), dtype=np.int64)
        _COMP_CACHE[key] = mat
    return mat


def _hmaj_pick_probabilities_float(h: int, c: Configuration) -> Optional[np.ndarray]:
    """Float-weight multiset enumeration over the configuration's support."""
    counts = c.as_array()
    support = np.flatnonzero(counts)
    s = support.size
    if math.comb(h + s - 1, s - 1) > ENGINE_MULTISET_CAP:
        return None
    comp = _composition_matrix(h, s)
    logq = np.log(counts[support] / c.n)
    logw = gammaln(h + 1) - gammaln(comp + 1).sum(axis=1) + comp @ logq
    w = np.exp(logw)
    mx = comp.max(axis=1, keepdims=True)
    tied = comp == mx
    share = w / tied.sum(axis=1)
    p = np.zeros(c.k)
    p[support] = (tied * share[:, None]).sum(axis=0)
    return p


def exact_pick_probabilities(d: Dynamics, c: Configuration) -> Optional[np.ndarray]:
    """Per-node pick distribution if the engine can compute it, else None.

    3-majority (both tie-break variants, marginally identical) and the
    h = 1, 3 plurality cases use the closed form; the median rule uses its
    order-statistic CDF; table rules use vectorized triple enumeration;
    other h values use multiset enumeration while the support is small
    enough.  Every path is validated against the exact rational
    enumerations in the test suite.
    """
    if d.h is not None:
        if d.h == 1:
            return c.as_array() / c.n
        if d.h == 3:
            return pick_probabilities_3maj(c)
        return _hmaj_pick_probabilities_float(d.h, c)
    kind = d.rule.kind
    if kind in (KIND_3MAJ, KIND_3MAJ_FIRST):
        return pick_probabilities_3maj(c)
    if kind == KIND_MEDIAN:
        return _median_pick_probabilities(c)
    if kind == KIND_TABLE and d.rule.k == c.k:
        return _table_pick_probabilities(d.rule, c)
    return None


def _agent_step(c: Configuration, d: Dynamics, rng: np.random.Generator) -> np.ndarray:
    counts = c.as_array()
    if d.h is not None:
        return kernels.step_hmaj(counts, d.h, rng)
    rule = d.rule
    if rule.kind == KIND_TABLE:
        if rule.k != c.k:
            raise ValueError(f"rule is defined for k={rule.k}, configuration has k={c.k}")
        return kernels.step_table(counts, rule.table.ravel(), c.k, rng)
    codes = {
        KIND_3MAJ: kernels.CODE_3MAJ,
        KIND_3MAJ_FIRST: kernels.CODE_3MAJ_FIRST,
        KIND_MEDIAN: kernels.CODE_MEDIAN,
    }
    return kernels.step_builtin(counts, codes[rule.kind], rng)


def step(
    c: Configuration,
    d: Dynamics,
    rng: np.random.Generator,
    engine: str = "auto",
) -> Configuration:
    """Advance one synchronous round; preserves n and k."""
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}")
    if engine != "agent":
        p = exact_pick_probabilities(d, c)
        if p is not None:
            # renormalize for sampling only; analytics always see raw values
            pv = np.clip(p, 0.0, None)
            counts = rng.multinomial(c.n, pv / pv.sum())
            return new_configuration(counts)
        if engine == "multinomial":
            raise ValueError("no exact pick distribution available; use the agent engine")
    return new_configuration(_agent_step(c, d, rng))


def sample_next_counts(
    c: Configuration, d: Dynamics, rng: np.random.Generator, size: int
) -> np.ndarray:
    """Draw ``size`` independent one-round successors of ``c`` (size x k)."""
    p = exact_pick_probabilities(d, c)
    if p is not None:
        pv = np.clip(p, 0.0, None)
        return rng.multinomial(c.n, pv / pv.sum(), size=size)
    return np.stack([_agent_step(c, d, rng) for _ in range(size)])


def default_max_rounds(n: int, k: int) -> int:
    """Round budget far above the expected convergence regime."""
    return 200 * k * max(1, math.ceil(math.log2(max(2, n))))


def run_trial(
    c0: Configuration,
    d: Dynamics,
    policy: Optional[AdversaryPolicy] = None,
    max_rounds: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    engine: str = "auto",
    record_trajectory: bool = False,
) -> TrialResult:
    """Run until monochromatic or ``max_rounds``; rounds counts steps taken.

    ``reached_majority`` compares the winner against the unique plurality
    color of the initial configuration (False when either is undefined).
    The adversary acts just before each synchronous step.
    """
    if rng is None:
        rng = np.random.default_rng()
    if policy is None:
        policy = AdversaryPolicy.none()
    if max_rounds is None:
        max_rounds = default_max_rounds(c0.n, c0.k)
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    initial_majority = is_s_biased(c0, 0)
    trajectory: Optional[list[tuple[int, int, int]]] = [] if record_trajectory else None

    def record(t: int, c: Configuration) -> None:
        if trajectory is not None:
            st = bias_stats(c)
            trajectory.append((t, st.s, st.m))

    c = c0
    record(0, c)
    winner = monochromatic_color(c)
    rounds = 0
    if winner is None:
        for t in range(1, max_rounds + 1):
            c = apply_adversary(c, policy)
            c = step(c, d, rng, engine=engine)
            record(t, c)
            winner = monochromatic_color(c)
            if winner is not None:
                rounds = t
                break
        else:
            rounds = max_rounds
    return TrialResult(
        converged=winner is not None,
        winner=winner,
        rounds=rounds,
        reached_majority=winner is not None
        and initial_majority is not None
        and winner == initial_majority,
        trajectory=tuple(trajectory) if trajectory is not None else None,
    )


def rounds_until_count(
    c0: Configuration,
    d: Dynamics,
    target: int,
    max_rounds: int,
    rng: np.random.Generator,
    engine: str = "auto",
) -> tuple[int, bool]:
    """Rounds until the plurality count first reaches ``target``.

    Returns (rounds, reached); rounds equals max_rounds when the target was
    never reached.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    c = c0
    if max(c.counts) >= target:
        return 0, True
    for t in range(1, max_rounds + 1):
        c = step(c, d, rng, engine=engine)
        if max(c.counts) >= target:
            return t, True
    return max_rounds, False


def absorption_ensemble(
    c0: Configuration,
    d: Dynamics,
    trials: int,
    rng: np.random.Generator,
    max_rounds: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo absorption statistics for many trials at once.

    Trials currently in the same configuration share one batched multinomial
    draw per round (valid by the Markov property: conditioned on the state,
    next states are iid).  Returns (winners, rounds) per trial; a winner of
    -1 marks a trial still unabsorbed at the round budget.

    Only uses one-step sampling, never the exact chain's linear algebra, so
    it is an independent check of the transition analysis.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if max_rounds is None:
        max_rounds = default_max_rounds(c0.n, c0.k)
    n, k = c0.n, c0.k
    cur = np.tile(np.array(c0.counts, dtype=np.int64), (trials, 1))
    winners = np.full(trials, -1, dtype=np.int64)
    rounds = np.zeros(trials, dtype=np.int64)
    alive = np.arange(trials)

    mono = cur[alive].max(axis=1) == n
    if mono.any():
        done = alive[mono]
        winners[done] = np.argmax(cur[done], axis=1)
        alive = alive[~mono]

    for t in range(1, max_rounds + 1):
        if alive.size == 0:
            break
        states, inverse = np.unique(cur[alive], axis=0, return_inverse=True)
        for i in range(states.shape[0]):
            rows = alive[inverse == i]
            cfg = new_configuration(states[i])
            p = exact_pick_probabilities(d, cfg)
            if p is not None:
                pv = np.clip(p, 0.0, None)
                cur[rows] = rng.multinomial(n, pv / pv.sum(), size=rows.size)
            else:
                for r in rows:
                    cur[r] = _agent_step(cfg, d, rng)
        mono = cur[alive].max(axis=1) == n
        if mono.any():
            done = alive[mono]
            winners[done] = np.argmax(cur[done], axis=1)
            rounds[done] = t
            alive = alive[~mono]
    return winners, rounds


# --- initial-configuration generators ---------------------------------------


def gen_balanced_biased(n: int, k: int, s: int) -> Configuration:
    """One color at C + s, the rest near C = floor((n - s)/k).

    The flooring remainder is distributed one node each to the *last*
    colors, never to the majority color, so the total is exactly n.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not 0 <= s <= n:
        raise ValueError("s must lie in [0, n]")
    base = (n - s) // k
    counts = [base] * k
    counts[0] = base + s
    rem = n - (base * k + s)
    for j in range(k - rem, k):
        counts[j] += 1
    return new_configuration(counts)


def gen_three_color_lb(n: int, s: int) -> Configuration:
    """3-color start (n/3 + s, n/3, n/3 - s); flooring remainder to the middle."""
    if s < 0 or s > n // 3:
        raise ValueError("s must lie in [0, n/3]")
    base = n // 3
    rem = n - 3 * base
    return new_configuration([base + s, base + rem, base - s])


def gen_power_biased(n: int, k: int, eps: float) -> Configuration:
    """Majority at floor(n/k + (n/k)^(1-eps)), the rest spread evenly.

    The remainder goes one node each to the last minority colors; raises
    ValueError when the requested majority cannot dominate.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    ratio = n / k
    c0 = int(math.floor(ratio + ratio ** (1.0 - eps)))
    rest = n - c0
    if rest < 0:
        raise ValueError("infeasible: majority count exceeds n")
    base, rem = divmod(rest, k - 1)
    counts = [c0] + [base] * (k - 1)
    for j in range(k - rem, k):
        counts[j] += 1
    if max(counts[1:]) > c0:
        raise ValueError("infeasible: a minority color would exceed the majority")
    return new_configuration(counts)


# --- deterministic seeding ---------------------------------------------------

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


def derive_trial_seed(master_seed: int, trial_index: int) -> int:
    """SplitMix64 mix of (master_seed, trial_index) -> 64-bit trial seed.

    The mixing function is fixed forever so a (master seed, trial counter)
    pair reproduces the same stream regardless of worker count.
    """
    if trial_index < 0:
        raise ValueError("trial_index must be non-negative")
    z = (master_seed + (trial_index + 1) * _SPLITMIX_GAMMA) & _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z
