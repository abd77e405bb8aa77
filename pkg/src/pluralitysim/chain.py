"""Exact finite Markov-chain analysis for tiny (n, k).

Enumerates every configuration of n nodes into k colors (the weak
compositions of n, in lexicographic order) and builds the exact one-round
transition matrix: from state c each node independently picks a color with
the rule's exact pick distribution p(c), so the next state is multinomial
(n, p(c)) and each row is a multinomial pmf over the compositions supported
by p.  Monochromatic states are absorbing.

On top of the matrix: absorption probabilities and expected absorption
times (fundamental-matrix linear solves), one-step expectations (validation
target for the closed-form drift), a two-color supermartingale check, and
the exact pick probabilities of the skewed tie-break rule on the 3-color
lower-bound start.

The pick distributions used here always come from the exact rational
enumerations in :mod:`pluralitysim.rules`, never from the simulation
engine's float fast paths, so oracle and engine stay independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.special import gammaln

from .coloring import Configuration, new_configuration
from .engine import Dynamics, gen_three_color_lb
from .rules import (
    EnumerationLimitError,
    Rule3,
    compositions,
    pick_probabilities_hmaj,
    pick_probabilities_rule,
    skewed_tiebreak_rule,
)

__all__ = [
    "ExactChain",
    "SupermartingaleReport",
    "build_chain",
    "absorption_probabilities",
    "expected_absorption_time",
    "one_step_expectation",
    "verify_supermartingale",
    "drift_8_27",
    "export_chain_text",
]

DEFAULT_STATE_CAP = 100_000
ROW_SUM_TOL = 1e-10
ABSORPTION_ROW_TOL = 1e-8
# above this many transient states, switch from dense LU to sparse LU
DENSE_SOLVE_CAP = 4000


@dataclass(frozen=True, eq=False)
class ExactChain:
    """Enumerated state space and exact transition structure."""

    n: int
    k: int
    dynamics: Dynamics
    states: np.ndarray  # (S, k) int64, lexicographic composition order
    matrix: scipy.sparse.csr_matrix  # (S, S)
    absorbing: np.ndarray  # indices of monochromatic states

    @property
    def num_states(self) -> int:
        return self.states.shape[0]

    def state_index(self, counts: Sequence[int]) -> int:
        key = np.asarray(counts, dtype=np.int64)
        matches = np.flatnonzero((self.states == key).all(axis=1))
        if matches.size != 1:
            raise KeyError(f"state {tuple(counts)} not in chain")
        return int(matches[0])


def _oracle_pick_probabilities(d: Dynamics, c: Configuration) -> np.ndarray:
    if d.h is not None:
        return pick_probabilities_hmaj(d.h, c)
    return pick_probabilities_rule(d.rule, c)


def build_chain(
    n: int, k: int, d: Dynamics, state_cap: int = DEFAULT_STATE_CAP
) -> ExactChain:
    """Enumerate all C(n+k-1, k-1) states and their exact transition rows.

    Row pmfs are computed in log space (gammaln) and exponentiated per
    entry; each row must sum to 1 within 1e-10 or construction fails.
    """
    num_states = math.comb(n + k - 1, k - 1)
    if num_states > state_cap:
        raise EnumerationLimitError(
            f"{num_states} states exceed the cap {state_cap}"
        )
    states = np.array(list(compositions(n, k)), dtype=np.int64)
    index = {tuple(int(x) for x in row): i for i, row in enumerate(states)}

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    log_n_fact = gammaln(n + 1)
    for i in range(num_states):
        cfg = new_configuration(states[i])
        p = _oracle_pick_probabilities(d, cfg)
        support = np.flatnonzero(p > 0.0)
        if support.size == 1:
            target = [0] * k
            target[int(support[0])] = n
            rows.append(i)
            cols.append(index[tuple(target)])
            vals.append(1.0)
            continue
        logp = np.log(p[support])
        total = 0.0
        for comp in compositions(n, support.size):
            y = np.array(comp, dtype=np.int64)
            logpmf = log_n_fact - gammaln(y + 1).sum() + float(y @ logp)
            prob = math.exp(logpmf)
            target = [0] * k
            for j, cnt in zip(support, comp):
                target[int(j)] = cnt
            rows.append(i)
            cols.append(index[tuple(target)])
            vals.append(prob)
            total += prob
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise ArithmeticError(f"row {i} sums to {total}, off by {total - 1.0:.3e}")
    matrix = scipy.sparse.csr_matrix(
        (vals, (rows, cols)), shape=(num_states, num_states)
    )
    absorbing = np.flatnonzero(states.max(axis=1) == n)
    return ExactChain(n=n, k=k, dynamics=d, states=states, matrix=matrix, absorbing=absorbing)


def _solve_transient(chain: ExactChain, rhs: np.ndarray) -> np.ndarray:
    """Solve (I - Q) x = rhs on the transient block; raises on singularity."""
    transient = np.setdiff1d(np.arange(chain.num_states), chain.absorbing)
    q = chain.matrix[transient][:, transient]
    size = transient.size
    if size == 0:
        return np.zeros((0,) + rhs.shape[1:])
    a = scipy.sparse.identity(size, format="csc") - q.tocsc()
    try:
        # singularity surfaces either as an exception or as non-finite
        # output; both are converted to ValueError below
        with np.errstate(all="ignore"):
            if size <= DENSE_SOLVE_CAP:
                x = scipy.linalg.solve(a.toarray(), rhs)
            else:
                lu = scipy.sparse.linalg.splu(a)
                x = lu.solve(rhs)
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        raise ValueError(f"singular absorption system: {exc}") from exc
    residual = np.abs(a @ x - rhs).max()
    if not np.isfinite(x).all() or residual > ROW_SUM_TOL * max(1.0, np.abs(rhs).max()):
        raise ValueError(f"absorption solve residual {residual:.3e} too large")
    return x


def absorption_probabilities(chain: ExactChain) -> np.ndarray:
    """Hitting probability of each monochromatic state, per starting state.

    Returns an (S, num_absorbing) matrix whose rows sum to 1 within 1e-8.
    """
    transient = np.setdiff1d(np.arange(chain.num_states), chain.absorbing)
    r = chain.matrix[transient][:, chain.absorbing].toarray()
    b = _solve_transient(chain, r)
    out = np.zeros((chain.num_states, chain.absorbing.size))
    out[transient] = b
    for pos, idx in enumerate(chain.absorbing):
        out[idx, pos] = 1.0
    bad = np.abs(out.sum(axis=1) - 1.0).max()
    if bad > ABSORPTION_ROW_TOL:
        raise ValueError(f"absorption rows sum off by {bad:.3e}")
    return out


def expected_absorption_time(chain: ExactChain) -> np.ndarray:
    """Expected rounds to absorption from each state (0 on absorbing states)."""
    transient = np.setdiff1d(np.arange(chain.num_states), chain.absorbing)
    t = _solve_transient(chain, np.ones(transient.size))
    out = np.zeros(chain.num_states)
    out[transient] = t
    return out


def one_step_expectation(
    chain: ExactChain, state: Union[int, Sequence[int]]
) -> np.ndarray:
    """Expected next counts sum_{c'} P(c -> c') c' for one state."""
    idx = state if isinstance(state, (int, np.integer)) else chain.state_index(state)
    row = chain.matrix.getrow(int(idx))
    return np.asarray(row @ chain.states, dtype=float).ravel()


@dataclass(frozen=True)
class SupermartingaleReport:
    """Two-color drift audit of a 3-input rule.

    ``delta_r`` / ``delta_b`` count majority-respecting outcomes over the
    three orderings of (r, r, b) and (b, b, r); ``drift[x]`` is
    E[X' | X = x] - x for the red count x on (x, n - x).
    """

    n: int
    delta_r: int
    delta_b: int
    drift: np.ndarray
    max_drift_above_half: float
    supermartingale_above_half: bool
    exact_martingale: bool


def verify_supermartingale(rule: Rule3, n: int, tol: float = 1e-12) -> SupermartingaleReport:
    """Audit E[X'|X=x] against x on all two-color configurations (x, n-x)."""
    if rule.kind == "table" and (rule.k is None or rule.k < 2):
        raise ValueError("rule is not evaluable on 2 colors")
    r, b = 0, 1
    delta_r = sum(
        1 for t in ((r, r, b), (r, b, r), (b, r, r)) if rule.eval(t) == r
    )
    delta_b = sum(
        1 for t in ((b, b, r), (b, r, b), (r, b, b)) if rule.eval(t) == b
    )
    drift = np.empty(n + 1)
    for x in range(n + 1):
        cfg = new_configuration([x, n - x])
        p = pick_probabilities_rule(rule, cfg)
        drift[x] = n * p[0] - x
    upper = drift[math.ceil(n / 2):]
    max_above = float(upper.max())
    return SupermartingaleReport(
        n=n,
        delta_r=delta_r,
        delta_b=delta_b,
        drift=drift,
        max_drift_above_half=max_above,
        supermartingale_above_half=max_above <= tol,
        exact_martingale=bool(np.abs(drift).max() <= tol),
    )


def drift_8_27(n: int, s: int) -> tuple[float, float]:
    """Exact pick probabilities of the skewed tie-break rule on the
    (n/3 + s, n/3, n/3 - s) start; (8/27, 10/27) at s = 0 and 3 | n."""
    rule = skewed_tiebreak_rule()
    cfg = gen_three_color_lb(n, s)
    p = pick_probabilities_rule(rule, cfg)
    return float(p[0]), float(p[1])


def export_chain_text(chain: ExactChain) -> str:
    """Debug dump: one state per line, composition then target:prob pairs."""
    lines = []
    for i in range(chain.num_states):
        row = chain.matrix.getrow(i)
        pairs = " ".join(
            f"{j}:{v:.12g}" for j, v in zip(row.indices, row.data)
        )
        comp = " ".join(str(int(x)) for x in chain.states[i])
        lines.append(f"{comp} -> {pairs}")
    return "\n".join(lines) + "\n"
