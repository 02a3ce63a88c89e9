"""Benchmark problem generators and gap evaluators."""

import numpy as np
import pytest

from opsplit.problems import (
    GapNotComputableError,
    duality_gap,
    evaluate_gap,
    make_affine_inclusion,
    make_lasso,
    make_matrix_game,
    make_smoothed_saddle,
)
from opsplit.operators import project_simplex

RNG = np.random.default_rng(4242)


class TestAffineInclusion:
    def test_scalar_solve(self):
        # dim 1 forces S = 0, so xbar = -b / nu
        p = make_affine_inclusion(1, 1.0, 0.0, seed=0)
        b = p.B(np.zeros(1))
        assert p.known_zero[0] == pytest.approx(-b[0], rel=1e-12)

    def test_zero_is_a_zero_of_the_sum(self):
        for seed in range(5):
            p = make_affine_inclusion(6, 1.0, 3.0, seed=seed)
            residual = p.nu * p.known_zero + p.B(p.known_zero)
            assert np.max(np.abs(residual)) <= 1e-9

    def test_pure_rotation_zero(self):
        p = make_affine_inclusion(4, 0.0, 2.0, seed=1)
        assert np.max(np.abs(p.B(p.known_zero))) <= 1e-9
        assert p.nu == 0.0

    def test_odd_dim_rotation_is_singular(self):
        # odd-dimensional skew matrices are singular
        with pytest.raises(ValueError):
            make_affine_inclusion(3, 0.0, 1.0, seed=0)

    def test_fixed_point_certificate(self):
        for seed in range(5):
            p = make_affine_inclusion(8, 0.7, 2.5, seed=seed)
            for gamma in (0.1, 1.0):
                assert p.fixed_point_residual(gamma) <= 1e-9

    def test_declared_mu_matches_operator_norm(self):
        p = make_affine_inclusion(10, 1.0, 4.0, seed=3)
        S = p.B.linear_matrix
        assert p.mu == pytest.approx(np.linalg.norm(S, 2), rel=1e-8)
        assert p.mu == pytest.approx(4.0, rel=1e-8)

    def test_hand_built_planar_instance(self):
        # nu = 1, S = [[0,1],[-1,0]], b = (1,0): the zero of
        # x + Sx + b is -(I+S)^{-1} b = (-1/2, -1/2)
        from opsplit.operators import affine_map, scaled_identity
        from opsplit.problems import InclusionProblem
        S = np.array([[0.0, 1.0], [-1.0, 0.0]])
        b = np.array([1.0, 0.0])
        xbar = -np.linalg.solve(np.eye(2) + S, b)
        assert np.allclose(xbar, [-0.5, -0.5])
        prob = InclusionProblem(
            A=scaled_identity(1.0, dim=2), B=affine_map(skew=S, offset=b),
            dim=2, mu=1.0, nu=1.0, known_zero=xbar)
        for gamma in (0.1, 1.0):
            assert prob.fixed_point_residual(gamma) <= 1e-9


class TestLasso:
    def test_zero_design(self):
        p = make_lasso(np.zeros((3, 2)), np.zeros(3), 0.1)
        assert np.array_equal(p.reference_solution, np.zeros(2))

    def test_scalar_soft_threshold(self):
        # min 0.1|x| + (x-1)^2/2 has solution 1 - 0.1
        p = make_lasso([[1.0]], [1.0], 0.1)
        assert p.reference_solution[0] == pytest.approx(0.9, abs=1e-10)

    def test_reference_beats_perturbations(self):
        A = RNG.standard_normal((20, 5))
        b = RNG.standard_normal(20)
        p = make_lasso(A, b, 0.3)
        x = p.reference_solution
        fstar = p.objective(x)
        for _ in range(1000):
            pert = x + RNG.standard_normal(5) * RNG.choice([1e-3, 1e-1, 1.0])
            assert p.objective(pert) >= fstar - 1e-12

    def test_gradient_lipschitz_certificate(self):
        A = RNG.standard_normal((15, 4))
        p = make_lasso(A, RNG.standard_normal(15), 0.2)
        for _ in range(200):
            x, y = RNG.standard_normal(4), RNG.standard_normal(4)
            lhs = np.linalg.norm(p.grad(x) - p.grad(y))
            assert lhs <= (p.mu_h + 1e-9) * np.linalg.norm(x - y)

    def test_components_average_to_gradient(self):
        A = RNG.standard_normal((6, 3))
        p = make_lasso(A, RNG.standard_normal(6), 0.2)
        x = RNG.standard_normal(3)
        mean = sum(c(x) for c in p.components) / len(p.components)
        assert np.allclose(mean, p.grad(x), atol=1e-12)

    def test_lambda_positive(self):
        with pytest.raises(ValueError):
            make_lasso([[1.0]], [1.0], 0.0)


class TestMatrixGame:
    def test_matching_pennies(self):
        g = make_matrix_game([[1.0, -1.0], [-1.0, 1.0]])
        x, v = g.known_saddle
        assert np.allclose(x, [0.5, 0.5], atol=1e-9)
        assert np.allclose(v, [0.5, 0.5], atol=1e-9)
        assert g.game_value == pytest.approx(0.0, abs=1e-12)

    def test_single_strategy(self):
        g = make_matrix_game([[3.5]])
        x, v = g.known_saddle
        assert x[0] == pytest.approx(1.0)
        assert v[0] == pytest.approx(1.0)
        assert g.game_value == pytest.approx(3.5)

    def test_dominant_row(self):
        # row 0 strictly smaller everywhere: the minimiser plays it purely
        g = make_matrix_game([[0.0, 0.1], [1.0, 2.0]])
        x, v = g.known_saddle
        assert np.allclose(x, [1.0, 0.0], atol=1e-9)
        # and the maximiser picks the best column against it
        assert g.game_value == pytest.approx(0.1)

    def test_equilibrium_is_best_response(self):
        M = RNG.standard_normal((4, 3))
        g = make_matrix_game(M)
        x, v = g.known_saddle
        omega = g.game_value
        assert np.all(M @ v >= omega - 1e-8)
        assert np.all(M.T @ x <= omega + 1e-8)


class TestSmoothedSaddle:
    def test_scalar_instance(self):
        g = make_smoothed_saddle([[1.0]], 1.0)
        x, v = g.known_saddle
        # dim-1 simplices are single points
        assert x[0] == pytest.approx(1.0, abs=1e-9)
        assert v[0] == pytest.approx(1.0, abs=1e-9)

    def test_gap_finite_for_large_beta(self):
        g = make_smoothed_saddle([[1.0, -1.0], [-1.0, 1.0]], 50.0)
        val = duality_gap(g, np.array([0.7, 0.3]), np.array([0.4, 0.6]))
        assert np.isfinite(val) and val >= 0

    def test_saddle_inequality_chain(self):
        g = make_smoothed_saddle(RNG.standard_normal((3, 3)), 0.8,
                                 saddle_tol=1e-12)
        xs, vs = g.known_saddle
        gval = evaluate_gap(g, xs, vs)
        for _ in range(100):
            x = project_simplex(RNG.standard_normal(3))
            v = project_simplex(RNG.standard_normal(3))
            assert evaluate_gap(g, xs, v) <= gval + 1e-7
            assert gval <= evaluate_gap(g, x, vs) + 1e-7

    def test_saddle_has_near_zero_gap(self):
        g = make_smoothed_saddle(RNG.standard_normal((2, 4)), 1.3,
                                 saddle_tol=1e-12)
        assert duality_gap(g, *g.known_saddle) <= 1e-8


class TestEvaluateGap:
    def test_bilinear_value_at_uniform(self):
        g = make_matrix_game([[1.0, -1.0], [-1.0, 1.0]])
        val = evaluate_gap(g, [0.5, 0.5], [0.5, 0.5])
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_infeasible_primal_is_plus_inf(self):
        g = make_matrix_game([[1.0, -1.0], [-1.0, 1.0]])
        assert evaluate_gap(g, [0.9, 0.9], [0.5, 0.5]) == np.inf

    def test_infeasible_dual_is_minus_inf(self):
        g = make_matrix_game([[1.0, -1.0], [-1.0, 1.0]])
        assert evaluate_gap(g, [0.5, 0.5], [-0.2, 0.4]) == -np.inf

    def test_saddle_inequality_on_random_pairs(self):
        g = make_matrix_game([[1.0, -1.0], [-1.0, 1.0]])
        xs, vs = g.known_saddle
        gval = evaluate_gap(g, xs, vs)
        for _ in range(100):
            x = project_simplex(RNG.standard_normal(2))
            v = project_simplex(RNG.standard_normal(2))
            assert evaluate_gap(g, xs, v) <= gval + 1e-10
            assert gval <= evaluate_gap(g, x, vs) + 1e-10


class TestDualityGap:
    def test_zero_at_equilibrium(self):
        g = make_matrix_game([[1.0, -1.0], [-1.0, 1.0]])
        assert duality_gap(g, *g.known_saddle) <= 1e-12

    def test_pure_strategies(self):
        g = make_matrix_game([[1.0, -1.0], [-1.0, 1.0]])
        assert duality_gap(g, [1.0, 0.0], [1.0, 0.0]) == pytest.approx(2.0)

    def test_permutation_invariance(self):
        M = RNG.standard_normal((3, 3))
        g = make_matrix_game(M)
        perm = np.array([2, 0, 1])
        Mp = M[np.ix_(perm, perm)]
        gp = make_matrix_game(Mp)
        for _ in range(50):
            x = project_simplex(RNG.standard_normal(3))
            v = project_simplex(RNG.standard_normal(3))
            a = duality_gap(g, x, v)
            bb = duality_gap(gp, x[perm], v[perm])
            assert a == pytest.approx(bb, abs=1e-10)

    def test_nonnegative_and_decomposition(self):
        g = make_matrix_game(RNG.standard_normal((4, 4)))
        K = g.K.matrix
        for _ in range(200):
            x = project_simplex(RNG.standard_normal(4))
            v = project_simplex(RNG.standard_normal(4))
            gap = duality_gap(g, x, v)
            assert gap >= -1e-12
            sup_term = np.max(K @ x)
            inf_term = np.min(K.T @ v)
            assert gap == pytest.approx(sup_term - inf_term, abs=1e-10)

    def test_infeasible_inputs_rejected(self):
        g = make_matrix_game([[1.0]])
        with pytest.raises(ValueError):
            duality_gap(g, [2.0], [1.0])

    def test_unsupported_class_refused(self):
        g = make_matrix_game([[1.0]])
        g.kind = "custom"
        with pytest.raises(GapNotComputableError):
            duality_gap(g, [1.0], [1.0])


def test_norm_K_matches_payoff_norm():
    M = np.array([[1.0, -1.0], [-1.0, 1.0]])
    g = make_matrix_game(M)
    assert g.norm_K() == pytest.approx(2.0, rel=1e-9)
