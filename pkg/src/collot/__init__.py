"""Collision-based Monte Carlo solvers for multi-marginal optimal transport."""

from collot.core import CouplingState, MarginalSamples, Problem, SolverConfig, init_coupling, new_problem
from collot.cost import GenericTuple, PairwiseLp, gangbo_swiech, mean_cost, swap_delta, tuple_cost, wasserstein_estimate
from collot.solvers import RunReport, collision_solve, collision_sweep, isa_solve, isa_sweep, make_pairing

__all__ = [
    "CouplingState", "MarginalSamples", "Problem", "SolverConfig", "init_coupling", "new_problem",
    "GenericTuple", "PairwiseLp", "gangbo_swiech", "mean_cost", "swap_delta", "tuple_cost", "wasserstein_estimate",
    "RunReport", "collision_solve", "collision_sweep", "isa_solve", "isa_sweep", "make_pairing",
]

__version__ = "0.1.0"
