"""Strong adversaries: scripted and searched policies, sampling, and bounds."""

from __future__ import annotations

from .bounds import DomainError, prob_x_lower_bound, theorem_bound
from .eventx import Decomposition, decompose, event_x_holds, iteration_spans
from .montecarlo import MonteCarloResult, hoeffding_half_width, monte_carlo, trial_seed
from .outcomes import OutcomeSpaceTooLarge, outcome_set
from .policies import (
    POLICIES,
    CraftedABDWeakener,
    Policy,
    RandomPolicy,
    Replay,
    RoundRobin,
    Sequential,
    WrongConfiguration,
    crafted_abd_weakener_policy,
)
from .search import OptimalPolicy, SearchResult, SearchStats, expectimax

__all__ = [
    "POLICIES", "CraftedABDWeakener", "Decomposition", "DomainError", "MonteCarloResult",
    "OptimalPolicy", "OutcomeSpaceTooLarge", "Policy", "RandomPolicy", "Replay", "RoundRobin", "SearchResult",
    "SearchStats", "Sequential", "WrongConfiguration", "crafted_abd_weakener_policy", "decompose",
    "event_x_holds", "expectimax", "hoeffding_half_width", "iteration_spans", "monte_carlo", "outcome_set",
    "prob_x_lower_bound", "theorem_bound", "trial_seed",
]
