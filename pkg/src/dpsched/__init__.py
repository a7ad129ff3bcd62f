"""Optimal average-delay vs average-power tradeoff for a single-buffer
transmitter with Bernoulli arrivals and adaptive per-slot transmission."""

from .model import (
    ModelParams,
    Policy,
    ThresholdPolicy,
    feasible_actions,
    threshold_to_policy,
    validate_params,
)
from .mrp import DelayPowerPoint, evaluate, mix_policies
from .pareto import ParetoCurve, algorithm1, brute_force_frontier, lower_convex_hull
from .lp import build_lp, recover_policy, solve_simplex, sweep
from .sim import SimulationResult, simulate

__all__ = [
    "ModelParams",
    "Policy",
    "ThresholdPolicy",
    "feasible_actions",
    "threshold_to_policy",
    "validate_params",
    "DelayPowerPoint",
    "evaluate",
    "mix_policies",
    "ParetoCurve",
    "algorithm1",
    "brute_force_frontier",
    "lower_convex_hull",
    "build_lp",
    "solve_simplex",
    "recover_policy",
    "sweep",
    "SimulationResult",
    "simulate",
]

__version__ = "0.1.0"
