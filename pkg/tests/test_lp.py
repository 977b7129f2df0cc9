"""The embedded simplex solver: hand cases, degeneracy, and a scipy cross-check."""

import numpy as np
import pytest

from gridcharge.mpc import LpStatus, linprog_min

scipy_opt = pytest.importorskip("scipy.optimize")


class TestHandCases:
    def test_single_upper_bound(self):
        sol = linprog_min(np.array([-1.0]), a_ub=[[1.0]], b_ub=[3.0])
        assert sol.status is LpStatus.OPTIMAL
        assert sol.values[0] == pytest.approx(3.0)
        assert -sol.objective == pytest.approx(3.0)

    def test_two_variable_vertex(self):
        sol = linprog_min(np.array([-1.0, -1.0]), a_ub=[[1, 1], [1, 0]], b_ub=[4, 1])
        assert sol.status is LpStatus.OPTIMAL
        assert -sol.objective == pytest.approx(4.0)

    def test_infeasible(self):
        sol = linprog_min(np.array([-1.0]), a_ub=[[1.0], [-1.0]], b_ub=[1.0, -2.0])
        assert sol.status is LpStatus.INFEASIBLE
        assert sol.values is None

    def test_unbounded(self):
        sol = linprog_min(np.array([-1.0]))
        assert sol.status is LpStatus.UNBOUNDED

    def test_equality_constraints(self):
        sol = linprog_min(np.array([1.0, 2.0]), a_eq=[[1.0, 1.0]], b_eq=[3.0])
        assert sol.status is LpStatus.OPTIMAL
        assert sol.values == pytest.approx([3.0, 0.0])

    def test_variable_upper_bounds(self):
        sol = linprog_min(
            np.array([-1.0, -2.0]), a_ub=[[1.0, 1.0]], b_ub=[3.0], upper=np.array([1.0, 5.0])
        )
        assert sol.values == pytest.approx([0.0, 3.0])

    def test_bound_flip_path(self):
        # Optimum sits on a variable's own upper bound, not a constraint row.
        sol = linprog_min(np.array([-1.0, 0.0]), a_ub=[[0.0, 1.0]], b_ub=[1.0], upper=np.array([2.0, np.inf]))
        assert sol.values[0] == pytest.approx(2.0)

    def test_beale_degenerate_cycling_example(self):
        # Classic cycling instance; must terminate under both pivot rules.
        c = np.array([-0.75, 150.0, -0.02, 6.0])
        a_ub = np.array(
            [
                [0.25, -60.0, -0.04, 9.0],
                [0.5, -90.0, -0.02, 3.0],
                [0.0, 0.0, 1.0, 0.0],
            ]
        )
        b_ub = np.array([0.0, 0.0, 1.0])
        reference = scipy_opt.linprog(c, A_ub=a_ub, b_ub=b_ub, method="highs")
        for rule in ("hybrid", "bland"):
            sol = linprog_min(c, a_ub, b_ub, rule=rule)
            assert sol.status is LpStatus.OPTIMAL
            assert sol.objective == pytest.approx(reference.fun, abs=1e-9)


class TestAgainstScipy:
    @pytest.mark.parametrize("rule", ["hybrid", "bland"])
    def test_random_instances(self, rule):
        rng = np.random.default_rng(2024)
        for _ in range(120):
            n = int(rng.integers(2, 12))
            m = int(rng.integers(1, 10))
            c = rng.normal(size=n)
            a_ub = rng.normal(size=(m, n))
            b_ub = a_ub @ rng.uniform(0, 1, n) + rng.uniform(-0.5, 1.0, m)
            upper = np.where(rng.random(n) < 0.6, rng.uniform(0.3, 4.0, n), np.inf)
            m_eq = int(rng.integers(0, 2))
            a_eq = rng.normal(size=(m_eq, n)) if m_eq else None
            b_eq = (a_eq @ (rng.uniform(0, 1, n) * np.minimum(upper, 1.0))) if m_eq else None
            mine = linprog_min(c, a_ub, b_ub, a_eq, b_eq, upper, rule=rule)
            bounds = [(0.0, u if np.isfinite(u) else None) for u in upper]
            ref = scipy_opt.linprog(
                c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs"
            )
            if ref.status == 2:
                assert mine.status is LpStatus.INFEASIBLE
            elif ref.status == 3:
                assert mine.status is LpStatus.UNBOUNDED
            else:
                assert mine.status is LpStatus.OPTIMAL
                assert mine.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)

    def test_optimal_solutions_feasible(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(2, 10))
            m = int(rng.integers(1, 8))
            c = rng.normal(size=n)
            a_ub = rng.normal(size=(m, n))
            b_ub = a_ub @ rng.uniform(0, 1, n) + rng.uniform(0, 1, m)
            upper = np.where(rng.random(n) < 0.5, rng.uniform(0.3, 4.0, n), np.inf)
            sol = linprog_min(c, a_ub, b_ub, upper=upper)
            if sol.status is not LpStatus.OPTIMAL:
                continue
            x = sol.values
            assert np.all(x >= -1e-7)
            assert np.all(x <= upper + 1e-7)
            assert np.all(a_ub @ x <= b_ub + 1e-7)


class TestDeterminism:
    def test_identical_inputs_identical_outputs(self):
        rng = np.random.default_rng(11)
        c = rng.normal(size=8)
        a_ub = rng.normal(size=(6, 8))
        b_ub = a_ub @ rng.uniform(0, 1, 8) + 0.5
        upper = np.where(rng.random(8) < 0.5, rng.uniform(0.5, 2.0, 8), np.inf)
        first = linprog_min(c, a_ub, b_ub, upper=upper)
        second = linprog_min(c, a_ub, b_ub, upper=upper)
        assert first.objective == second.objective
        assert np.array_equal(first.values, second.values)
