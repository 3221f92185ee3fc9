import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wegl.transport import (
    sinkhorn, solve_ot, squared_cost, verify_optimality, wasserstein2,
    solve_count, reset_solve_count,
)


def permutation_optimum(cost):
    """Brute force over all assignments; valid for square uniform problems."""
    n = cost.shape[0]
    best = min(sum(cost[i, p[i]] for i in range(n))
               for p in itertools.permutations(range(n)))
    return best / n


class TestSquaredCost:
    def test_zero_diagonal_on_identical_clouds(self):
        z = np.random.default_rng(0).standard_normal((5, 3))
        c = squared_cost(z, z)
        assert np.all(np.diag(c) == 0.0)

    def test_single_points(self):
        assert squared_cost(np.array([[0.0]]), np.array([[3.0]]))[0, 0] == 9.0

    def test_matches_elementwise_recomputation(self):
        rng = np.random.default_rng(1)
        a, b = rng.standard_normal((4, 2)), rng.standard_normal((5, 2))
        c = squared_cost(a, b)
        for i in range(4):
            for j in range(5):
                expected = sum((a[i, k] - b[j, k]) ** 2 for k in range(2))
                assert abs(c[i, j] - expected) < 1e-12

    def test_transpose_symmetry(self):
        rng = np.random.default_rng(2)
        a, b = rng.standard_normal((3, 4)), rng.standard_normal((6, 4))
        assert np.array_equal(squared_cost(a, b), squared_cost(b, a).T)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            squared_cost(np.zeros((2, 2)), np.zeros((2, 3)))


class TestSolveOt:
    def test_two_by_two_diagonal(self):
        res = solve_ot(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.array_equal(res.plan, [[0.5, 0.0], [0.0, 0.5]])
        assert res.objective == 0.0

    def test_single_row_forced_plan(self):
        cost = np.array([[3.0, 1.0, 2.0]])
        res = solve_ot(cost)
        assert np.allclose(res.plan, 1.0 / 3.0)
        assert np.isclose(res.objective, cost.mean())

    def test_matches_permutation_enumeration(self):
        rng = np.random.default_rng(10)
        for _ in range(60):
            n = int(rng.integers(1, 8))
            cost = rng.random((n, n))
            res = solve_ot(cost)
            best = permutation_optimum(cost)
            assert abs(res.objective - best) <= 1e-12 * max(best, 1.0)

    def test_marginals_and_vertex_support(self):
        rng = np.random.default_rng(20)
        for _ in range(60):
            n, m = int(rng.integers(1, 15)), int(rng.integers(1, 15))
            res = solve_ot(rng.random((n, m)))
            assert np.abs(res.plan.sum(axis=1) - 1.0 / n).max() < 1e-12
            assert np.abs(res.plan.sum(axis=0) - 1.0 / m).max() < 1e-12
            assert (res.plan > 1e-15).sum() <= n + m - 1

    def test_tie_heavy_costs_terminate(self):
        rng = np.random.default_rng(30)
        for _ in range(40):
            n, m = int(rng.integers(2, 9)), int(rng.integers(2, 9))
            cost = rng.integers(0, 3, size=(n, m)).astype(float)
            res = solve_ot(cost)
            assert verify_optimality(cost, res, tol=1e-9).passed

    def test_empty_and_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            solve_ot(np.zeros((0, 3)))
        with pytest.raises(ValueError):
            solve_ot(np.array([[np.inf, 1.0]]))

    def test_solve_counter(self):
        reset_solve_count()
        for _ in range(3):
            solve_ot(np.ones((2, 2)))
        assert solve_count() == 3

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 6), st.integers(2, 6), st.floats(0.1, 10.0), st.integers(0, 10**6))
    def test_positive_homogeneity(self, n, m, scale, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.standard_normal((n, 3)), rng.standard_normal((m, 3))
        base = solve_ot(squared_cost(a, b)).objective
        scaled = solve_ot(squared_cost(scale * a, scale * b)).objective
        assert scaled == pytest.approx(scale**2 * base, rel=1e-9, abs=1e-12)
        assert wasserstein2(scale * a, scale * b) == pytest.approx(
            scale * wasserstein2(a, b), rel=1e-9, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 7), st.integers(2, 7), st.integers(0, 10**6))
    def test_row_permutation_invariance(self, n, m, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.standard_normal((n, 2)), rng.standard_normal((m, 2))
        w = wasserstein2(a, b)
        assert wasserstein2(a[rng.permutation(n)], b[rng.permutation(m)]) == pytest.approx(
            w, rel=1e-9, abs=1e-12)


class TestWasserstein2:
    def test_identity(self):
        z = np.random.default_rng(3).standard_normal((6, 2))
        assert wasserstein2(z, z) == 0.0

    def test_translation(self):
        rng = np.random.default_rng(4)
        z = rng.standard_normal((8, 3))
        t = np.array([1.0, -2.0, 0.5])
        assert wasserstein2(z, z + t) == pytest.approx(np.linalg.norm(t), rel=1e-12)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(5)
        for _ in range(15):
            clouds = [rng.standard_normal((5, 2)) for _ in range(3)]
            dab = wasserstein2(clouds[0], clouds[1])
            dbc = wasserstein2(clouds[1], clouds[2])
            dac = wasserstein2(clouds[0], clouds[2])
            assert dac <= dab + dbc + 1e-9

    def test_symmetry(self):
        rng = np.random.default_rng(6)
        a, b = rng.standard_normal((4, 2)), rng.standard_normal((7, 2))
        assert wasserstein2(a, b) == pytest.approx(wasserstein2(b, a), rel=1e-12)


class TestVerifyOptimality:
    def test_solver_output_passes(self):
        rng = np.random.default_rng(7)
        cost = rng.random((8, 5))
        res = solve_ot(cost)
        cert = verify_optimality(cost, res, tol=1e-9)
        assert cert.passed
        assert cert.worst_violation < 1e-9
        assert cert.duality_gap < 1e-9

    def test_diagonal_plan_passes(self):
        cost = np.array([[0.0, 1.0], [1.0, 0.0]])
        cert = verify_optimality(cost, np.array([[0.5, 0.0], [0.0, 0.5]]))
        assert cert.passed

    def test_antidiagonal_plan_fails(self):
        cost = np.array([[0.0, 1.0], [1.0, 0.0]])
        cert = verify_optimality(cost, np.array([[0.0, 0.5], [0.5, 0.0]]))
        assert not cert.passed
        assert cert.worst_violation > 0.5

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            verify_optimality(np.zeros((2, 2)), np.zeros((2, 3)))


class TestSinkhorn:
    def test_small_epsilon_approaches_exact(self):
        cost = np.array([[0.0, 1.0], [1.0, 0.0]])
        res = sinkhorn(cost, epsilon=1e-3)
        assert abs(res.objective - 0.0) < 1e-2

    def test_large_epsilon_gives_product_coupling(self):
        rng = np.random.default_rng(8)
        cost = rng.random((3, 4))
        res = sinkhorn(cost, epsilon=1e4)
        outer = np.full((3, 4), (1.0 / 3.0) * (1.0 / 4.0))
        assert np.abs(res.plan - outer).max() < 1e-4

    def test_marginals_at_convergence(self):
        rng = np.random.default_rng(9)
        cost = rng.random((5, 7))
        res = sinkhorn(cost, epsilon=0.05)
        assert np.abs(res.plan.sum(axis=1) - 1.0 / 5.0).max() < 1e-8
        assert np.abs(res.plan.sum(axis=0) - 1.0 / 7.0).max() < 1e-8

    def test_objective_upper_bounds_exact(self):
        rng = np.random.default_rng(12)
        for eps in (1.0, 0.1, 0.01):
            cost = rng.random((6, 6))
            exact = solve_ot(cost).objective
            assert sinkhorn(cost, eps).objective >= exact - 1e-9

    def test_epsilon_positive_required(self):
        with pytest.raises(ValueError):
            sinkhorn(np.ones((2, 2)), epsilon=0.0)

    def test_nonconvergence_raises(self):
        with pytest.raises(RuntimeError):
            sinkhorn(np.random.default_rng(1).random((4, 4)), epsilon=1e-4, max_iter=2)
