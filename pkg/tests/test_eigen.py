import math

import numpy as np
import pytest

from pqlap.eigen import (
    ConvergenceError,
    analytic_eigenfunction,
    analytic_lambda_k,
    count_sign_changes,
    eigen_residual,
    first_eigenpair,
    inverse_r_laplacian,
    mode_eigenpair,
    pi_r,
    shooting_pi_r,
)
from pqlap.functionals import r_laplacian
from pqlap.grid import Grid1D, GridFunction, norm

from oracles import LAMBDA1_P3_N199, LAMBDA1_Q2_N199, LAMBDA1_R2, LAMBDA1_R3, PI_R3, lambda_k


class TestClosedForms:
    def test_pi_2_is_pi(self):
        assert pi_r(2) == pytest.approx(math.pi, rel=1e-15)

    def test_pi_3(self):
        assert pi_r(3) == pytest.approx(PI_R3, rel=1e-15)

    def test_lambda_values(self):
        assert analytic_lambda_k(2, 1) == pytest.approx(LAMBDA1_R2, rel=1e-15)
        assert analytic_lambda_k(3, 1) == pytest.approx(LAMBDA1_R3, rel=1e-15)
        assert analytic_lambda_k(2, 3) == pytest.approx(9 * math.pi ** 2, rel=1e-14)

    @pytest.mark.parametrize("r", [1.3, 1.5, 2.0, 3.0, 4.0, 6.0])
    def test_scaling_in_k(self, r):
        for k in (2, 3, 5):
            assert analytic_lambda_k(r, k) == pytest.approx(k ** r * analytic_lambda_k(r, 1), rel=1e-13)
            assert analytic_lambda_k(r, k) == pytest.approx(lambda_k(r, k), rel=1e-13)

    @pytest.mark.parametrize("r", [1.5, 2.0, 2.5, 3.0, 4.0, 6.0])
    def test_shooting_matches_closed_form(self, r):
        assert shooting_pi_r(r) == pytest.approx(pi_r(r), rel=1e-6)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            pi_r(1.0)
        with pytest.raises(ValueError):
            analytic_lambda_k(2, 0)


class TestInverse:
    @pytest.mark.parametrize("r", [1.5, 2.0, 3.0])
    def test_inverts_r_laplacian(self, r, rng):
        grid = Grid1D(63)
        g = rng.normal(size=grid.n)
        v = inverse_r_laplacian(g, r, grid)
        back = r_laplacian(GridFunction(grid, v), r)
        assert np.max(np.abs(back - g)) <= 1e-8 * (1 + np.max(np.abs(g)))

    def test_zero(self):
        grid = Grid1D(15)
        assert not inverse_r_laplacian(np.zeros(grid.n), 3, grid).any()


class TestFirstEigenpair:
    def test_regression_values(self, eig):
        assert eig(3.0).lam == pytest.approx(LAMBDA1_P3_N199, rel=1e-10)
        assert eig(2.0).lam == pytest.approx(LAMBDA1_Q2_N199, rel=1e-10)

    def test_p2_matches_discrete_sine(self, grid):
        pair = first_eigenpair(2, grid)
        exact = 4 / grid.h ** 2 * math.sin(math.pi * grid.h / 2) ** 2
        assert pair.lam == pytest.approx(exact, rel=1e-10)

    @pytest.mark.parametrize("r", [1.5, 2.0, 3.0, 4.0])
    def test_positive_normalized_small_residual(self, r, grid):
        pair = first_eigenpair(r, grid)
        assert pair.phi.values.min() > 0
        assert norm(pair.phi, r) == pytest.approx(1.0, rel=1e-12)
        assert eigen_residual(pair) <= 1e-7

    @pytest.mark.parametrize("r", [1.5, 2.0, 3.0, 4.0])
    def test_refinement_error_decreases(self, r):
        exact = analytic_lambda_k(r, 1)
        errors = [abs(first_eigenpair(r, Grid1D(n)).lam - exact) / exact for n in (49, 199, 799)]
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-3

    def test_simple_from_two_starts(self, grid, rng):
        a = first_eigenpair(3, grid)
        b = first_eigenpair(3, grid, init=GridFunction(grid, rng.uniform(0.1, 1.0, grid.n)))
        assert b.lam == pytest.approx(a.lam, rel=1e-10)
        assert np.max(np.abs(a.phi.values - b.phi.values)) < 1e-6

    def test_shifted_eigenvalue_is_not_a_solution(self, eig):
        pair = eig(3.0)
        wrong = type(pair)(lam=pair.lam + 1, phi=pair.phi, r=3.0)
        assert eigen_residual(wrong) > 1e-2

    def test_budget_exhaustion(self, grid):
        with pytest.raises(ConvergenceError):
            first_eigenpair(3, grid, max_iter=1)

    def test_close_to_generalized_sine(self):
        grid = Grid1D(999)
        pair = first_eigenpair(3, grid)
        sine = analytic_eigenfunction(3, 1, grid)
        assert np.max(np.abs(pair.phi.values - sine.phi.values)) < 1e-4


class TestModes:
    @pytest.mark.parametrize("r,k", [(2.0, 2), (3.0, 2), (3.0, 3), (1.5, 4)])
    def test_sign_changes(self, r, k):
        grid = Grid1D(239)
        pair = mode_eigenpair(r, k, grid)
        assert count_sign_changes(pair.phi) == k - 1
        assert eigen_residual(pair) <= 1e-7
        assert pair.lam == pytest.approx(analytic_lambda_k(r, k), rel=1e-3)

    def test_divisibility(self, grid):
        with pytest.raises(ValueError):
            mode_eigenpair(3, 3, grid)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_analytic_sampling(self, k):
        pair = analytic_eigenfunction(3, k, Grid1D(299))
        assert count_sign_changes(pair.phi) == k - 1
        assert pair.lam == analytic_lambda_k(3, k)
