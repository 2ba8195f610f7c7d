"""Dual-fitting certificates for coordination mechanisms and scheduling heuristics."""

from .cost import Mechanism, deviation_costs, social_cost
from .dualfit import DualSolution, FeasibilityReport, Scenario, fit_dual, scenario_constants, verify_dual, verify_dual_cce
from .equilibria import ProfileDistribution, best_response_dynamics, check_cce, check_equilibrium
from .generators import KKParams, RandomProfile, gen_kk, gen_lower_bound_ls, gen_random
from .localsearch import check_gamma_potential, check_jumpopt, improved_local_search, jump_opt
from .model import AffineInstance, Assignment, CongestionInstance, scheduling_instance, validate_instance
from .online import greedy_online
from .sdp import CostKind, build_cost_matrix, gram_matrix

__all__ = [
    "AffineInstance", "Assignment", "CongestionInstance", "CostKind", "DualSolution", "FeasibilityReport",
    "KKParams", "Mechanism", "ProfileDistribution", "RandomProfile", "Scenario", "best_response_dynamics",
    "build_cost_matrix", "check_cce", "check_equilibrium", "check_gamma_potential", "check_jumpopt",
    "deviation_costs", "fit_dual", "gen_kk", "gen_lower_bound_ls", "gen_random", "gram_matrix",
    "greedy_online", "improved_local_search", "jump_opt", "scenario_constants", "scheduling_instance",
    "social_cost", "validate_instance", "verify_dual", "verify_dual_cce",
]
