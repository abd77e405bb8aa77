"""Experiment harness: deterministic parameter sweeps with CSV/JSON output.

Every experiment expands into a flat list of trial tasks ordered by (sweep
point, trial index); each task owns a seed derived from the master seed and
its global position, so running with 1 or many workers produces identical
records.  Raw records go to a fixed-schema CSV, summaries to JSON.

CSV schema (fixed column order, missing dimensions empty):

    experiment,n,k,h,s,eps,trial,seed,rounds,winner,converged,reached_majority
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import constants
from .coloring import Configuration, is_s_biased, new_configuration
from .rules import median_rule, three_majority
from .engine import (
    AdversaryPolicy,
    Dynamics,
    default_max_rounds,
    derive_trial_seed,
    gen_balanced_biased,
    gen_power_biased,
    rounds_until_count,
    run_trial,
    sample_next_counts,
)

__all__ = [
    "RunRecord",
    "TrialTask",
    "CSV_COLUMNS",
    "records_to_csv",
    "write_records",
    "read_records",
    "run_tasks",
    "wilson_interval",
    "scaling_bias",
    "scaling_k_experiment",
    "lb_growth_experiment",
    "h_speedup_experiment",
    "bias_decrease_experiment",
    "median_failure_experiment",
    "simulate_experiment",
]

CSV_COLUMNS = (
    "experiment",
    "n",
    "k",
    "h",
    "s",
    "eps",
    "trial",
    "seed",
    "rounds",
    "winner",
    "converged",
    "reached_majority",
)


@dataclass(frozen=True)
class RunRecord:
    """One trial outcome at one sweep point."""

    experiment: str
    n: int
    k: Optional[int]
    h: Optional[int]
    s: Optional[int]
    eps: Optional[float]
    trial: int
    seed: int
    rounds: int
    winner: Optional[int]
    converged: bool
    reached_majority: bool

    def to_row(self) -> list[str]:
        def fmt(v) -> str:
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return repr(v)
            return str(v)

        return [fmt(getattr(self, col)) for col in CSV_COLUMNS]


def records_to_csv(records: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.to_row())
    return buf.getvalue()


def write_records(records: Sequence[RunRecord], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))


def read_records(path: str) -> list[RunRecord]:
    """Parse a records CSV back into RunRecord objects (exact round-trip)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        for row in reader:
            out.append(
                RunRecord(
                    experiment=row["experiment"],
                    n=int(row["n"]),
                    k=int(row["k"]) if row["k"] else None,
                    h=int(row["h"]) if row["h"] else None,
                    s=int(row["s"]) if row["s"] else None,
                    eps=float(row["eps"]) if row["eps"] else None,
                    trial=int(row["trial"]),
                    seed=int(row["seed"]),
                    rounds=int(row["rounds"]),
                    winner=int(row["winner"]) if row["winner"] else None,
                    converged=row["converged"] == "true",
                    reached_majority=row["reached_majority"] == "true",
                )
            )
    return out


@dataclass(frozen=True)
class TrialTask:
    """Self-contained, picklable description of one trial."""

    experiment: str
    counts0: tuple[int, ...]
    dynamics: Dynamics
    adversary: AdversaryPolicy
    max_rounds: int
    engine: str
    seed: int
    trial: int
    k: Optional[int] = None
    h: Optional[int] = None
    s: Optional[int] = None
    eps: Optional[float] = None
    stop_target: Optional[int] = None  # stop when the plurality count reaches this


def _run_task(task: TrialTask) -> RunRecord:
    rng = np.random.default_rng(task.seed)
    c0 = new_configuration(task.counts0)
    if task.stop_target is None:
        res = run_trial(
            c0,
            task.dynamics,
            policy=task.adversary,
            max_rounds=task.max_rounds,
            rng=rng,
            engine=task.engine,
        )
        rounds, winner = res.rounds, res.winner
        converged, reached = res.converged, res.reached_majority
    else:
        rounds, reached_target = rounds_until_count(
            c0, task.dynamics, task.stop_target, task.max_rounds, rng, engine=task.engine
        )
        winner = None
        converged = reached_target
        initial = is_s_biased(c0, 0)
        reached = reached_target and initial is not None
    return RunRecord(
        experiment=task.experiment,
        n=c0.n,
        k=task.k,
        h=task.h,
        s=task.s,
        eps=task.eps,
        trial=task.trial,
        seed=task.seed,
        rounds=rounds,
        winner=winner,
        converged=converged,
        reached_majority=reached,
    )


def run_tasks(tasks: Sequence[TrialTask], workers: int = 1) -> list[RunRecord]:
    """Execute tasks, in order; results are ordered by task position."""
    if workers <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, len(tasks) // (workers * 4))
        return list(pool.map(_run_task, tasks, chunksize=chunk))


def wilson_interval(successes: int, total: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if total <= 0:
        return 0.0, 1.0
    phat = successes / total
    denom = 1.0 + z * z / total
    center = (phat + z * z / (2 * total)) / denom
    half = z * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _point_summary(sweep: dict, records: Sequence[RunRecord]) -> dict:
    rates = [r.reached_majority for r in records]
    hits = sum(rates)
    return {
        "sweep": sweep,
        "median_rounds": float(statistics.median(r.rounds for r in records)),
        "majority_rate": hits / len(records),
        "ci95": list(wilson_interval(hits, len(records))),
    }


# --- experiments -------------------------------------------------------------


def scaling_bias(n: int, k: int) -> tuple[int, bool]:
    """Prescribed starting bias for the k-scaling law at desk scale.

    The theoretical prescription ceil(22 * sqrt(min(2k, cbrt(n/ln n)) *
    n * ln n)) is used verbatim whenever it leaves every minority color at
    least one node; at desk scale it exceeds n for moderate k, in which
    case the start falls back to the balanced scale s = n/k (majority
    ~ 2n/k, the growth regime of the lower-bound argument).  Returns
    (s, fallback_used); see docs/pilot.md for the calibration runs.
    """
    ln_n = math.log(n)
    lam = min(2.0 * k, (n / ln_n) ** (1.0 / 3.0))
    s = math.ceil(constants.SCALING_BIAS_COEFF * math.sqrt(lam * n * ln_n))
    if s <= n - k:
        return s, False
    return n // k, True


def scaling_k_experiment(
    n: int,
    k_list: Sequence[int],
    trials: int,
    seed: int,
    workers: int = 1,
    engine: str = "auto",
    max_rounds: Optional[int] = None,
) -> tuple[list[RunRecord], dict]:
    """3-majority consensus time vs k from the prescribed biased start."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    tasks: list[TrialTask] = []
    points: list[tuple[dict, int, int]] = []  # (sweep, start, count)
    skipped: list[dict] = []
    fallbacks: list[int] = []
    counter = 0
    for k in k_list:
        s, fell_back = scaling_bias(n, k)
        if fell_back:
            fallbacks.append(k)
        if s < 1:
            skipped.append({"k": k, "reason": "prescribed bias rounds to zero"})
            continue
        try:
            c0 = gen_balanced_biased(n, k, s)
        except ValueError as exc:
            skipped.append({"k": k, "reason": str(exc)})
            continue
        start = len(tasks)
        for t in range(trials):
            tasks.append(
                TrialTask(
                    experiment="scaling-k",
                    counts0=c0.counts,
                    dynamics=Dynamics.from_rule(three_majority()),
                    adversary=AdversaryPolicy.none(),
                    max_rounds=max_rounds or default_max_rounds(n, k),
                    engine=engine,
                    seed=derive_trial_seed(seed, counter),
                    trial=t,
                    k=k,
                    s=s,
                )
            )
            counter += 1
        points.append(({"n": n, "k": k, "s": s}, start, trials))
    if not tasks:
        raise ValueError("all k values were infeasible")
    records = run_tasks(tasks, workers)
    summary = {
        "experiment": "scaling-k",
        "params": {"n": n, "k_list": list(k_list), "trials": trials, "seed": seed},
        "points": [
            _point_summary(sweep, records[start : start + cnt])
            for sweep, start, cnt in points
        ],
    }
    if fallbacks:
        summary["warnings"] = [
            f"prescribed bias exceeds n at k={k}; using the balanced-scale fallback s=n/k"
            for k in fallbacks
        ]
    if skipped:
        summary["skipped"] = skipped
    return records, summary


def lb_growth_experiment(
    n: int,
    k_list: Sequence[int],
    eps: float,
    trials: int,
    seed: int,
    workers: int = 1,
    engine: str = "auto",
    max_rounds: Optional[int] = None,
) -> tuple[list[RunRecord], dict]:
    """Rounds for the plurality to grow from n/k + (n/k)^(1-eps) to 2n/k."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    hypothesis_limit = (n / math.log(n)) ** 0.25
    warnings = []
    tasks: list[TrialTask] = []
    points: list[tuple[dict, int, int]] = []
    counter = 0
    for k in k_list:
        if k > hypothesis_limit:
            warnings.append(
                f"k={k} violates the hypothesis k <= (n/ln n)^(1/4) ~ {hypothesis_limit:.2f}; running anyway"
            )
        c0 = gen_power_biased(n, k, eps)
        target = math.ceil(2 * n / k)
        start = len(tasks)
        for t in range(trials):
            tasks.append(
                TrialTask(
                    experiment="lb-growth",
                    counts0=c0.counts,
                    dynamics=Dynamics.from_rule(three_majority()),
                    adversary=AdversaryPolicy.none(),
                    max_rounds=max_rounds or default_max_rounds(n, k),
                    engine=engine,
                    seed=derive_trial_seed(seed, counter),
                    trial=t,
                    k=k,
                    eps=eps,
                    stop_target=target,
                )
            )
            counter += 1
        points.append(({"n": n, "k": k, "eps": eps, "target": target}, start, trials))
    records = run_tasks(tasks, workers)
    point_summaries = []
    for sweep, start, cnt in points:
        recs = records[start : start + cnt]
        reach = sum(r.converged for r in recs)
        point_summaries.append(
            {
                "sweep": sweep,
                "median_rounds": float(statistics.median(r.rounds for r in recs)),
                "majority_rate": reach / cnt,  # here: fraction reaching 2n/k
                "ci95": list(wilson_interval(reach, cnt)),
            }
        )
    summary = {
        "experiment": "lb-growth",
        "params": {"n": n, "k_list": list(k_list), "eps": eps, "trials": trials, "seed": seed},
        "points": point_summaries,
    }
    if warnings:
        summary["warnings"] = warnings
    return records, summary


def h_speedup_experiment(
    n: int,
    k: int,
    h_list: Sequence[int],
    trials: int,
    seed: int,
    workers: int = 1,
    engine: str = "auto",
    max_rounds: Optional[int] = None,
) -> tuple[list[RunRecord], dict]:
    """Consensus time of h-majority from a balanced start, h sweep.

    The start is perfectly balanced (bias 0), so the plurality holds at most
    ceil(n/k) <= (3/2) n/k nodes.  Reports the fitted exponent of median tau
    against k/h^2 and checks the committed floor and monotonicity.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if any(h < 1 for h in h_list):
        raise ValueError("h must be at least 1")
    c0 = gen_balanced_biased(n, k, 0)
    tasks: list[TrialTask] = []
    points: list[tuple[dict, int, int]] = []
    counter = 0
    for h in h_list:
        start = len(tasks)
        for t in range(trials):
            tasks.append(
                TrialTask(
                    experiment="h-speedup",
                    counts0=c0.counts,
                    dynamics=Dynamics.h_majority(h),
                    adversary=AdversaryPolicy.none(),
                    max_rounds=max_rounds or default_max_rounds(n, k),
                    engine=engine,
                    seed=derive_trial_seed(seed, counter),
                    trial=t,
                    k=k,
                    h=h,
                )
            )
            counter += 1
        points.append(({"n": n, "k": k, "h": h}, start, trials))
    records = run_tasks(tasks, workers)
    point_summaries = [
        _point_summary(sweep, records[start : start + cnt]) for sweep, start, cnt in points
    ]
    medians = [p["median_rounds"] for p in point_summaries]
    floors = [constants.H_SPEEDUP_TAU_FLOOR * k / (h * h) for h in h_list]
    scale = [k / (h * h) for h in h_list]
    fit_exponent = None
    if len(h_list) >= 2 and min(medians) > 0:
        fit_exponent = float(
            np.polyfit(np.log(np.array(scale)), np.log(np.array(medians)), 1)[0]
        )
    summary = {
        "experiment": "h-speedup",
        "params": {"n": n, "k": k, "h_list": list(h_list), "trials": trials, "seed": seed},
        "points": point_summaries,
        "checks": {
            "monotone_non_increasing": all(
                a >= b for a, b in zip(medians, medians[1:])
            ),
            "floor": constants.H_SPEEDUP_TAU_FLOOR,
            "floor_ok": all(m >= f for m, f in zip(medians, floors)),
            "fit_exponent_vs_k_over_h2": fit_exponent,
        },
    }
    return records, summary


def bias_decrease_experiment(
    n: int, k: int, trials: int, seed: int, fixed_j: int = 1
) -> tuple[list[RunRecord], dict]:
    """One-round probability that the bias toward a fixed color shrinks.

    Start: balanced-biased with s = floor(sqrt(k n) / 36) (majority color 0,
    the fixed minority color j holds exactly the base count).  Estimates
    P(C'_0 - C'_j < s) for the fixed j and for the best over all j, with
    binomial standard errors.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if k < 3:
        raise ValueError("k must be at least 3")
    s = int(math.isqrt(k * n) // 36)
    if s < 1:
        raise ValueError("bias floor(sqrt(k n)/36) rounds to zero")
    if not 1 <= fixed_j < k:
        raise ValueError("fixed_j must be a minority color index")
    c0 = gen_balanced_biased(n, k, s)
    rng = np.random.default_rng(derive_trial_seed(seed, 0))
    draws = sample_next_counts(c0, Dynamics.from_rule(three_majority()), rng, trials)
    gap_fixed = draws[:, 0] - draws[:, fixed_j]
    fixed_hits = int((gap_fixed < s).sum())
    min_gap = (draws[:, 0][:, None] - draws[:, 1:]).min(axis=1)
    any_hits = int((min_gap < s).sum())
    fixed_est = fixed_hits / trials
    any_est = any_hits / trials
    sigma = math.sqrt(max(fixed_est * (1 - fixed_est), 1e-12) / trials)
    threshold = constants.BIAS_DECREASE_FLOOR - 3 * sigma
    records = []
    for t in range(trials):
        winner = None
        row = draws[t]
        mx = row.max()
        where = np.flatnonzero(row == mx)
        if where.size == 1:
            winner = int(where[0])
        records.append(
            RunRecord(
                experiment="bias-decrease",
                n=n,
                k=k,
                h=None,
                s=s,
                eps=None,
                trial=t,
                seed=derive_trial_seed(seed, 0),
                rounds=1,
                winner=winner,
                converged=False,
                reached_majority=winner == 0,
            )
        )
    summary = {
        "experiment": "bias-decrease",
        "params": {"n": n, "k": k, "s": s, "trials": trials, "seed": seed, "fixed_j": fixed_j},
        "points": [
            {
                "sweep": {"n": n, "k": k, "s": s},
                "median_rounds": 1.0,
                "majority_rate": sum(r.reached_majority for r in records) / trials,
                "ci95": list(wilson_interval(sum(r.reached_majority for r in records), trials)),
            }
        ],
        "estimates": {
            "fixed_j": fixed_est,
            "any_j": any_est,
            "sigma": sigma,
            "floor": constants.BIAS_DECREASE_FLOOR,
            "threshold": threshold,
            "passed": fixed_est >= threshold,
        },
    }
    return records, summary


def median_failure_experiment(
    n: int,
    trials: int,
    seed: int,
    workers: int = 1,
    engine: str = "auto",
    max_rounds: Optional[int] = None,
) -> tuple[list[RunRecord], dict]:
    """Median dynamics from a start whose plurality is not the median color.

    Counts (0.30n, 0.34n, 0.36n): plurality is color 2 but the median of
    the initial color distribution is color 1, and the median dynamics
    locks onto it.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    c1 = round(0.30 * n)
    c2 = round(0.34 * n)
    counts = (c1, c2, n - c1 - c2)
    c0 = new_configuration(counts)
    tasks = [
        TrialTask(
            experiment="median-failure",
            counts0=c0.counts,
            dynamics=Dynamics.from_rule(median_rule()),
            adversary=AdversaryPolicy.none(),
            max_rounds=max_rounds or default_max_rounds(n, 3),
            engine=engine,
            seed=derive_trial_seed(seed, t),
            trial=t,
            k=3,
        )
        for t in range(trials)
    ]
    records = run_tasks(tasks, workers)
    plurality_rate = sum(r.winner == 2 for r in records) / trials
    median_rate = sum(r.winner == 1 for r in records) / trials
    summary = {
        "experiment": "median-failure",
        "params": {"n": n, "counts": list(counts), "trials": trials, "seed": seed},
        "points": [_point_summary({"n": n, "k": 3}, records)],
        "estimates": {
            "plurality_winner_rate": plurality_rate,
            "median_winner_rate": median_rate,
            "plurality_rate_below_quarter": plurality_rate
            < constants.MEDIAN_FAILURE_MAX_PLURALITY_RATE,
            "median_rate_above_half": median_rate > constants.MEDIAN_FAILURE_MIN_MEDIAN_RATE,
        },
    }
    return records, summary


def simulate_experiment(
    name: str,
    dynamics: Dynamics,
    configs: Sequence[tuple[dict, Configuration]],
    trials: int,
    seed: int,
    adversary: Optional[AdversaryPolicy] = None,
    max_rounds: Optional[int] = None,
    workers: int = 1,
    engine: str = "auto",
) -> tuple[list[RunRecord], dict]:
    """Generic sweep: run ``trials`` trials from each (sweep dims, config)."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    adversary = adversary or AdversaryPolicy.none()
    tasks: list[TrialTask] = []
    points: list[tuple[dict, int, int]] = []
    counter = 0
    for dims, c0 in configs:
        start = len(tasks)
        for t in range(trials):
            tasks.append(
                TrialTask(
                    experiment=name,
                    counts0=c0.counts,
                    dynamics=dynamics,
                    adversary=adversary,
                    max_rounds=max_rounds or default_max_rounds(c0.n, c0.k),
                    engine=engine,
                    seed=derive_trial_seed(seed, counter),
                    trial=t,
                    k=dims.get("k"),
                    h=dims.get("h"),
                    s=dims.get("s"),
                    eps=dims.get("eps"),
                )
            )
            counter += 1
        points.append((dims, start, trials))
    records = run_tasks(tasks, workers)
    summary = {
        "experiment": name,
        "params": {"trials": trials, "seed": seed, "dynamics": dynamics.describe()},
        "points": [
            _point_summary(sweep, records[start : start + cnt])
            for sweep, start, cnt in points
        ],
    }
    return records, summary


