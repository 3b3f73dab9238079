"""Contention game on a slotted collision channel, TRD-based manager
intervention, target selection and channel simulation."""

from .game import GameSpec, SamplingPlan, is_nash_base, is_pareto_efficient, payoff, sample_feasible_region, utilization
from .intervention import (
    AggregateRule,
    NoiseRobustRule,
    QuantizedTRDRule,
    TRDRule,
    evaluate,
    evaluate_aggregate,
    intervened_payoff,
    manager_payoff,
    rule_from_dict,
    trd,
)
from .search import SearchBudget

__all__ = [
    "AggregateRule",
    "GameSpec",
    "NoiseRobustRule",
    "QuantizedTRDRule",
    "SamplingPlan",
    "SearchBudget",
    "TRDRule",
    "evaluate",
    "evaluate_aggregate",
    "intervened_payoff",
    "is_nash_base",
    "is_pareto_efficient",
    "manager_payoff",
    "payoff",
    "rule_from_dict",
    "sample_feasible_region",
    "trd",
    "utilization",
]
