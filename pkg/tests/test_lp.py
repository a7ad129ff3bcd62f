import numpy as np
import pytest

from dpsched import errors, mrp
from dpsched.lp import (
    LpProblem,
    build_lp,
    occupation_measure,
    recover_policy,
    solve_simplex,
    sweep,
    sweep_to_csv,
    to_mps,
)
from dpsched.model import validate_params
from dpsched.pareto import algorithm1
from dpsched.verify import random_policy


class TestBuildLp:
    def test_reference_dimensions(self, params_vi):
        lp = build_lp(params_vi, 1.0)
        assert lp.n_vars == 23  # sum of feasible-set sizes over the 8 states
        assert lp.A_eq.shape == (8, 23)  # 7 balance rows + normalization
        assert lp.b_eq[-1] == 1.0 and not lp.b_eq[:-1].any()

    def test_objective_and_power_rows(self, params_vi):
        lp = build_lp(params_vi, 1.0)
        for j, (k, m) in enumerate(lp.var_index):
            assert lp.c[j] == pytest.approx(k / 0.8)
            assert lp.a_power[j] == params_vi.power[m]

    def test_negative_budget_rejected(self, params_vi):
        with pytest.raises(ValueError):
            build_lp(params_vi, -0.5)


class TestSimplexCore:
    def test_textbook_lp(self, params_vi):
        # max x1 + x2 s.t. x1 + 2 x2 <= 4 (power row), x1 + x2 + s = 2
        # rebuilt as: min -(x1 + x2) over our problem container
        lp = LpProblem(
            params=params_vi,
            p_th=4.0,
            var_index=((0, 0), (1, 0), (2, 0)),
            c=np.array([-1.0, -1.0, 0.0]),
            a_power=np.array([1.0, 2.0, 0.0]),
            A_eq=np.array([[1.0, 1.0, 1.0]]),
            b_eq=np.array([2.0]),
            eq_scale=1.0,
        )
        sol = solve_simplex(lp)
        assert sol.status == "optimal"
        assert float(lp.c @ sol.x) == pytest.approx(-2.0, abs=1e-12)

    def test_infeasible_budget(self, params_vi):
        # zero budget forbids all transmission, but state K must transmit
        sol = solve_simplex(build_lp(params_vi, 0.0))
        assert sol.status == "infeasible"

    def test_zero_delay_budget(self, params_vi):
        sol = solve_simplex(build_lp(params_vi, 1.6))
        assert sol.status == "optimal"
        assert sol.delay == pytest.approx(0.0, abs=1e-9)
        assert sol.power <= 1.6 + 1e-9

    def test_certificates(self, params_vi):
        for p_th in (0.85, 1.0, 1.3, 1.6, 3.0):
            sol = solve_simplex(build_lp(params_vi, p_th))
            assert sol.status == "optimal"
            assert sol.equilibrium_residual <= 1e-9
            assert sol.normalization_residual <= 1e-9
            assert float(np.min(sol.reduced_costs)) >= -1e-9
            assert float(np.min(sol.x)) >= -1e-12


class TestOccupationMeasure:
    def test_random_policies_satisfy_equalities(self, params_vi, rng):
        lp = build_lp(params_vi, 0.0)
        for _ in range(50):
            pol = random_policy(params_vi, rng)
            pi = mrp.stationary_distribution(
                mrp.build_transition_enumerative(params_vi, pol)
            )
            x = occupation_measure(params_vi, pol, pi)
            assert np.max(np.abs(lp.A_eq @ x - lp.b_eq)) <= 1e-12

    def test_objective_matches_delay(self, params_vi, rng):
        lp = build_lp(params_vi, 0.0)
        pol = random_policy(params_vi, rng)
        pi = mrp.stationary_distribution(
            mrp.build_transition_enumerative(params_vi, pol)
        )
        x = occupation_measure(params_vi, pol, pi)
        want = mrp.evaluate(params_vi, pol)
        assert float(lp.c @ x) - 1.0 == pytest.approx(want.delay, abs=1e-12)
        assert float(lp.a_power @ x) == pytest.approx(want.power, abs=1e-12)


class TestRecoverPolicy:
    def test_roundtrip_rewards(self, params_vi):
        for p_th in (0.9, 1.1, 1.6):
            sol = solve_simplex(build_lp(params_vi, p_th))
            pol = recover_policy(params_vi, sol)
            pt = mrp.evaluate(params_vi, pol)
            assert pt.delay == pytest.approx(sol.delay, abs=1e-9)
            assert pt.power <= p_th + 1e-9

    def test_zero_delay_policy_transmits_arrivals(self, params_vi):
        sol = solve_simplex(build_lp(params_vi, 1.6))
        pol = recover_policy(params_vi, sol)
        # reachable states 0 and 2 behave like immediate transmission
        assert pol.f[0, 0] == pytest.approx(1.0)
        assert pol.f[2, 2] == pytest.approx(1.0)

    def test_failure_status_rejected(self, params_vi):
        sol = solve_simplex(build_lp(params_vi, 0.0))
        with pytest.raises(errors.DegenerateSolution):
            recover_policy(params_vi, sol)


class TestSweep:
    def test_monotone_and_matches_curve(self, params_vi):
        curve = algorithm1(params_vi)
        budgets = np.linspace(curve.min_power, curve.max_power, 15)
        points = sweep(params_vi, [float(b) for b in budgets])
        delays = [p.delay for p in points]
        assert all(p.status == "optimal" for p in points)
        assert all(b <= a + 1e-9 for a, b in zip(delays, delays[1:]))
        for p in points:
            assert p.delay == pytest.approx(curve.interpolate(p.p_th), abs=1e-6)

    def test_csv(self, params_vi):
        csv = sweep_to_csv(sweep(params_vi, [0.0, 1.6]))
        lines = csv.splitlines()
        assert lines[0] == "p_th,delay,status"
        assert lines[1].endswith("infeasible")
        assert lines[2].endswith("optimal")


class TestMps:
    def test_structure(self, params_vi):
        text = to_mps(build_lp(params_vi, 1.6))
        assert text.startswith("NAME")
        assert "ROWS" in text and "COLUMNS" in text and text.rstrip().endswith("ENDATA")
        assert " N  DELAY" in text and " L  POWER" in text
        assert " E  NORM" in text
