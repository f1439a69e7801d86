"""Online allocation algorithms and the approximate-balance trace checker."""

from .apb import APBResult, check_apb_trace, matching_trace, project_trace, rank_event_holds
from .balance import run_msvv, run_perturbed_balance_vw
from .budget_additive import Decomposition, StageBuilder, decompose_instance, run_budget_additive
from .ranking import RankAssignment, run_perturbed_ranking_adwords, run_perturbed_ranking_integral

ALGORITHMS = {
    "pb": run_perturbed_balance_vw,
    "msvv": run_msvv,
    "pr": run_perturbed_ranking_integral,
    "pr-adwords": run_perturbed_ranking_adwords,
    "budget-additive": run_budget_additive,
}

__all__ = [
    "ALGORITHMS", "APBResult", "Decomposition", "RankAssignment", "StageBuilder", "check_apb_trace",
    "decompose_instance", "matching_trace", "project_trace", "rank_event_holds", "run_budget_additive",
    "run_msvv", "run_perturbed_balance_vw", "run_perturbed_ranking_adwords", "run_perturbed_ranking_integral",
]
