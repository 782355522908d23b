"""Equilibria, effort objectives and optimal design of rank-order contests with a shortlist.

The top ``m`` of ``n`` registrants (by privately known ability) are admitted
to a rank-order contest.  The modules compute what admitted contestants
believe about each other, the equilibrium effort they exert, the designer's
objectives under several independent representations, the optimal designs,
and Monte Carlo checks of all of the above.
"""

from .beliefs import ShortlistContext
from .design import (
    DesignReport,
    PrizeGrid,
    brute_force_prize_oracle,
    cheatsheet,
    optimal_complete_simple,
    optimal_max_effort,
    optimal_ratio,
    sup_optimal_m,
    universal_bound,
)
from .distributions import BetaDist, Exponential, PiecewiseLinearQuantile, Power, Uniform, parse_distribution
from .equilibrium import ContestConfig, CustomCost, LinearCost, PowerCost, solve_equilibrium
from .objectives import Objective, SimpleContestSpec, max_effort, total_effort, total_effort_beta_rep

__version__ = "0.1.0"

__all__ = [
    "BetaDist",
    "ContestConfig",
    "CustomCost",
    "DesignReport",
    "Exponential",
    "LinearCost",
    "Objective",
    "PiecewiseLinearQuantile",
    "Power",
    "PowerCost",
    "PrizeGrid",
    "ShortlistContext",
    "SimpleContestSpec",
    "Uniform",
    "brute_force_prize_oracle",
    "cheatsheet",
    "max_effort",
    "optimal_complete_simple",
    "optimal_max_effort",
    "optimal_ratio",
    "parse_distribution",
    "solve_equilibrium",
    "sup_optimal_m",
    "total_effort",
    "total_effort_beta_rep",
    "universal_bound",
    "__version__",
]
