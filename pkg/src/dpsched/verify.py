"""Cross-validation battery tying the independent routes together.

Each check pits two implementations of the same quantity against each
other: frontier walk vs brute force, LP sweep vs curve interpolation,
closed-form mixing vs direct re-evaluation, piecewise vs enumerative
transition construction, and simulation vs the analytic solve.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import ModelParams, Policy, feasible_actions
from . import mrp
from .lp import build_lp, occupation_measure, solve_simplex
from .pareto import algorithm1, brute_force_frontier
from .sim import simulate


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name:<28} worst={self.worst:.3e} tol={self.tolerance:.0e} {self.detail}"


def random_policy(params: ModelParams, rng: np.random.Generator) -> Policy:
    """Random feasible row-stochastic policy (Dirichlet rows)."""
    f = np.zeros((params.K + 1, params.M + 1))
    for k in range(params.K + 1):
        acts = list(feasible_actions(params, k))
        weights = rng.dirichlet(np.ones(len(acts)))
        for m, w in zip(acts, weights):
            f[k, m] = w
    return Policy(params, f)


def random_one_row_pair(
    params: ModelParams, rng: np.random.Generator
) -> tuple[Policy, Policy, int]:
    """Random pair of policies differing in exactly one (multi-action) row."""
    base = random_policy(params, rng)
    rows = [
        k for k in range(params.K + 1) if len(feasible_actions(params, k)) >= 2
    ]
    k = int(rng.choice(rows))
    for _ in range(100):
        acts = list(feasible_actions(params, k))
        weights = rng.dirichlet(np.ones(len(acts)))
        row = np.zeros(params.M + 1)
        for m, w in zip(acts, weights):
            row[m] = w
        if np.max(np.abs(row - base.f[k])) > 1e-6:
            f2 = base.f.copy()
            f2[k] = row
            return base, Policy(params, f2), k
    raise RuntimeError("failed to draw a differing row")


def check_transition_equivalence(
    params: ModelParams, trials: int, rng: np.random.Generator, tol: float = 1e-15
) -> CheckResult:
    worst = 0.0
    for _ in range(trials):
        pol = random_policy(params, rng)
        a = mrp.build_transition_enumerative(params, pol).matrix
        b = mrp.build_transition_piecewise(params, pol).matrix
        worst = max(worst, float(np.max(np.abs(a - b))))
    return CheckResult("transition-equivalence", worst <= tol, worst, tol)


def check_collinearity(
    params: ModelParams,
    trials: int,
    rng: np.random.Generator,
    tol: float = 1e-9,
    grid: int = 11,
) -> CheckResult:
    """Mixing two one-row-differing policies traces the chord between their
    reward pairs, with the closed-form interpolation weight and slope."""
    worst = 0.0
    eps_grid = np.linspace(0.0, 1.0, grid)
    for _ in range(trials):
        F, F2, _ = random_one_row_pair(params, rng)
        cache = mrp.EvalCache()
        ana = mrp.mixing_analysis(params, F, F2, cache)
        worst = max(worst, abs(ana.epsilon_prime(0.0)), abs(ana.epsilon_prime(1.0) - 1.0))
        prev = -1.0
        for eps in eps_grid:
            w = ana.epsilon_prime(float(eps))
            if w < prev - 1e-12:
                worst = max(worst, prev - w)
            prev = w
            mixed = mrp.mix_policies(F, F2, float(eps))
            got = mrp.evaluate(params, mixed, cache)
            want_p, want_d = ana.predicted_point(float(eps))
            worst = max(worst, abs(got.power - want_p), abs(got.delay - want_d))
        try:
            sl = mrp.segment_slope(params, F, F2, cache)
            # scale by the slope magnitude: steep segments (tiny power gap)
            # amplify solver rounding in the finite difference
            err = abs(sl.closed_form - sl.finite_difference)
            worst = max(worst, err / max(1.0, abs(sl.finite_difference)))
        except mrp.DegenerateSegment:
            pass
    return CheckResult("mixing-geometry", worst <= tol, worst, tol)


def curves_match(a, b, tol: float = 1e-9) -> float:
    """Worst componentwise vertex discrepancy between two curves."""
    if len(a.vertices) != len(b.vertices):
        return float("inf")
    worst = 0.0
    for va, vb in zip(a.vertices, b.vertices):
        worst = max(worst, abs(va.power - vb.power), abs(va.delay - vb.delay))
    return worst


def check_frontier_equivalence(params: ModelParams, tol: float = 1e-9) -> CheckResult:
    walk = algorithm1(params)
    brute = brute_force_frontier(params)
    worst = curves_match(walk, brute, tol)
    detail = f"({len(walk.vertices)} vs {len(brute.vertices)} vertices)"
    return CheckResult("frontier-equivalence", worst <= tol, worst, tol, detail)


def check_lp_overlap(
    params: ModelParams, n_budgets: int = 20, tol: float = 1e-6
) -> CheckResult:
    curve = algorithm1(params)
    budgets = np.linspace(curve.min_power, curve.max_power, n_budgets)
    worst = 0.0
    for p_th in budgets:
        sol = solve_simplex(build_lp(params, float(p_th)))
        if sol.status != "optimal":
            return CheckResult(
                "lp-curve-overlap", False, float("inf"), tol, f"status {sol.status} at {p_th}"
            )
        worst = max(worst, abs(sol.delay - curve.interpolate(float(p_th))))
    return CheckResult("lp-curve-overlap", worst <= tol, worst, tol)


def check_lp_consistency(
    params: ModelParams, trials: int, rng: np.random.Generator, tol: float = 1e-12
) -> CheckResult:
    """Occupation measures of valid policies satisfy the LP equalities."""
    lp = build_lp(params, p_th=0.0)
    worst = 0.0
    for _ in range(trials):
        pol = random_policy(params, rng)
        pi = mrp.stationary_distribution(mrp.build_transition_enumerative(params, pol))
        x = occupation_measure(params, pol, pi)
        worst = max(worst, float(np.max(np.abs(lp.A_eq @ x - lp.b_eq))))
    return CheckResult("lp-equalities", worst <= tol, worst, tol)


def check_simulation(
    params: ModelParams,
    trials: int,
    rng: np.random.Generator,
    slots: int = 1_000_000,
    seed: int = 1234,
    rel_tol: float = 0.02,
    tv_tol: float = 0.01,
) -> CheckResult:
    worst = 0.0
    for i in range(trials):
        pol = random_policy(params, rng)
        want = mrp.evaluate(params, pol)
        pi = mrp.stationary_distribution(
            mrp.build_transition_enumerative(params, pol)
        ).pi
        got = simulate(params, pol, slots=slots, seed=seed + i)
        if got.overflow_violations or got.underflow_violations:
            return CheckResult(
                "simulation-agreement", False, float("inf"), rel_tol, "buffer violation"
            )
        p_err = abs(got.empirical_power - want.power) / want.power
        if want.delay < 0.05:
            d_err = abs(got.empirical_delay - want.delay) / 0.01 * rel_tol
        else:
            d_err = abs(got.empirical_delay - want.delay) / want.delay
        tv = 0.5 * float(np.sum(np.abs(np.array(got.state_occupancy) - pi)))
        worst = max(worst, p_err, d_err, tv / tv_tol * rel_tol)
    return CheckResult("simulation-agreement", worst <= rel_tol, worst, rel_tol)


def run_battery(
    params: ModelParams,
    seed: int = 7,
    trials: int = 25,
    collinearity_tol: float = 1e-9,
    sim_slots: int = 1_000_000,
    sim_trials: int = 3,
) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        check_transition_equivalence(params, trials, rng),
        check_frontier_equivalence(params),
        check_lp_overlap(params),
        check_collinearity(params, trials, rng, tol=collinearity_tol),
        check_lp_consistency(params, trials, rng),
        check_simulation(params, sim_trials, rng, slots=sim_slots, seed=seed),
    ]
