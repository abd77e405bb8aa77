"""Plurality-consensus dynamics on the complete graph.

Simulation (3-majority, arbitrary 3-input rules, h-majority), exact
finite-chain analysis at tiny scale, rule classification, and a CLI
experiment harness with deterministic seeding.
"""

from .coloring import (
    BiasStats,
    Configuration,
    bias_stats,
    expected_next_3maj,
    expected_next_decomposed,
    is_s_biased,
    minority_expectation_bounds,
    monochromatic_color,
    new_configuration,
    pick_probabilities_3maj,
)
from .rules import (
    Classification,
    DeltaCounters,
    EnumerationLimitError,
    Rule3,
    RuleParseError,
    builtin_rule,
    classify,
    delta_counters,
    has_clear_majority_property,
    has_uniform_property,
    median_rule,
    parse_rule,
    pick_probabilities_hmaj,
    pick_probabilities_rule,
    serialize_rule,
    skewed_tiebreak_rule,
    table_rule,
    table_rule_from_entries,
    three_majority,
    three_majority_first,
)
from .engine import (
    AdversaryPolicy,
    Dynamics,
    TrialResult,
    absorption_ensemble,
    apply_adversary,
    default_max_rounds,
    derive_trial_seed,
    exact_pick_probabilities,
    gen_balanced_biased,
    gen_power_biased,
    gen_three_color_lb,
    rounds_until_count,
    run_trial,
    sample_next_counts,
    step,
)
from .chain import (
    ExactChain,
    SupermartingaleReport,
    absorption_probabilities,
    build_chain,
    drift_8_27,
    expected_absorption_time,
    export_chain_text,
    one_step_expectation,
    verify_supermartingale,
)

__version__ = "0.1.0"
