import numpy as np
import pytest

from rnnmpc import sqp


def box_bounds(steps=3, start=(0.8, 1.0)):
    return sqp.MoveBounds(
        steps=steps,
        move_min=[-0.1, -0.1],
        move_max=[0.1, 0.1],
        total_min=[0.75, 0.5],
        total_max=[0.85, 1.1],
        start=np.asarray(start),
    )


class TestMoveBounds:
    def test_residual_zero_for_feasible_moves(self):
        b = box_bounds()
        assert b.residual(np.zeros((3, 2))) == 0.0

    def test_residual_reports_worst_violation(self):
        b = box_bounds()
        d = np.zeros((3, 2))
        d[0, 0] = 0.2  # breaks both the move box and the q total box
        assert b.residual(d) == pytest.approx(0.15)

    def test_clip_feasible_repairs_small_violations(self):
        b = box_bounds()
        d = np.full((3, 2), 0.1 + 1e-10)
        repaired = b.clip_feasible(d)
        assert b.residual(repaired) <= 1e-15
        assert np.allclose(repaired[0], [0.05, 0.1])  # q total saturates at 0.85

    def test_zero_move_must_be_feasible(self):
        with pytest.raises(ValueError):
            sqp.MoveBounds(
                steps=2,
                move_min=[0.01, -0.1],
                move_max=[0.1, 0.1],
                total_min=[0.0, 0.0],
                total_max=[1.0, 1.0],
                start=[0.5, 0.5],
            )

    def test_start_outside_total_box_rejected(self):
        with pytest.raises(ValueError):
            box_bounds(start=(0.9, 1.0))


class TestSolveQp:
    def test_interior_quadratic_solved_exactly(self):
        b = box_bounds()
        n = b.n_vars
        h = np.eye(n) * 2.0
        target = np.full(n, 0.01)
        x = sqp.solve_qp(h, -h @ target, b)
        assert np.allclose(x, target, atol=1e-9)

    def test_active_total_bound_projects_correctly(self):
        # Pull every q move toward 0.08; totals cap the cumulative sum at
        # +0.05, so the optimum spreads the allowance evenly.
        b = box_bounds(steps=2)
        target = np.array([[0.08, 0.0], [0.08, 0.0]])
        x = sqp.solve_qp(np.eye(4), -target.reshape(-1), b).reshape(2, 2)
        assert x[0, 0] + x[1, 0] == pytest.approx(0.05, abs=1e-8)
        assert x[0, 0] == pytest.approx(0.025, abs=1e-6)
        assert b.residual(x) <= 1e-9

    def test_move_bound_binds(self):
        b = box_bounds(steps=1, start=(0.76, 0.6))
        x = sqp.solve_qp(np.eye(2), -np.array([0.5, -0.5]), b)
        assert np.allclose(x, [0.09, -0.1], atol=1e-8)  # q capped by total, T by move box


class TestProject:
    def test_feasible_point_is_unchanged(self):
        b = box_bounds()
        d = np.full((3, 2), 0.01)
        assert np.allclose(sqp.project(d, b), d, atol=1e-9)

    def test_projection_is_idempotent(self):
        b = box_bounds()
        d = np.full((3, 2), 0.2)
        p1 = sqp.project(d, b)
        p2 = sqp.project(p1, b)
        assert np.allclose(p1, p2, atol=1e-9)
        assert b.residual(p1) <= 1e-9


class TestMinimizeMoves:
    def test_matches_analytic_quadratic_minimum(self):
        b = box_bounds()
        target = np.array([[0.03, -0.02], [0.01, 0.04], [0.0, 0.02]])

        def objective(d):
            return ((d - target) ** 2).sum(axis=(1, 2))

        res = sqp.minimize_moves(objective, np.zeros((3, 2)), b)
        assert res.converged
        assert np.allclose(res.moves, target, atol=1e-5)
        assert res.constraint_residual <= 1e-9

    def test_descent_against_zero_and_warm_start(self):
        b = box_bounds()
        rng = np.random.default_rng(0)
        target = rng.uniform(-0.05, 0.05, (3, 2))

        def objective(d):
            return ((d - target) ** 2).sum(axis=(1, 2)) + 0.1 * np.abs(d).sum(axis=(1, 2))

        warm = rng.uniform(-0.08, 0.08, (3, 2))
        res = sqp.minimize_moves(objective, warm, b)
        assert res.cost <= objective(warm[np.newaxis])[0] + 1e-12
        assert res.cost <= objective(np.zeros((1, 3, 2)))[0] + 1e-12

    def test_infeasible_warm_start_is_projected(self):
        b = box_bounds()

        def objective(d):
            return (d**2).sum(axis=(1, 2))

        res = sqp.minimize_moves(objective, np.full((3, 2), 5.0), b)
        assert res.constraint_residual <= 1e-9
        assert res.cost == pytest.approx(0.0, abs=1e-10)

    def test_deterministic(self):
        b = box_bounds()
        target = np.array([[0.05, -0.03], [0.02, 0.01], [-0.01, 0.0]])

        def objective(d):
            return ((d - target) ** 2).sum(axis=(1, 2)) + np.sin(d.sum(axis=(1, 2)))

        a = sqp.minimize_moves(objective, np.zeros((3, 2)), b)
        c = sqp.minimize_moves(objective, np.zeros((3, 2)), b)
        assert np.array_equal(a.moves, c.moves)
        assert a.cost == c.cost and a.iterations == c.iterations

    def test_iteration_budget_flags_unconverged(self):
        b = box_bounds()
        rng = np.random.default_rng(3)
        bumps = rng.uniform(-1, 1, (7, 6))

        def nasty(d):
            flat = d.reshape(len(d), -1)
            val = (flat**2).sum(axis=1)
            for bump in bumps:
                val = val + 0.01 * np.sin(40 * flat @ bump)
            return val

        res = sqp.minimize_moves(nasty, np.full((3, 2), 0.05), b, max_iterations=2)
        assert res.iterations <= 2
        assert res.constraint_residual <= 1e-9
