import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq
from hypothesis import assume, given
from hypothesis import strategies as st

from pqlap.curves import CurvesContext, beta_star
from pqlap.eigen import ConvergenceError, first_eigenpair
from pqlap.functionals import DomainError, Params, energy_gradient, phi_plus
from pqlap.grid import Grid1D, GridFunction, SignClass, classify_sign, pairing
from pqlap.solve import (
    MinimizeBudget,
    find_solutions,
    flux,
    flux_inverse,
    march,
    minimize_energy,
    orthogonalize_source,
    picone_classical_gap,
    picone_generalized_gap,
    probe_epsilon,
    q_eval,
    q_prime,
    residual,
    shoot,
    tangency,
    tangency_for,
    tangency_residuals,
    verify_sign_theorems,
)

from oracles import (
    ALPHA_STAR_32_N199,
    BETA_STAR_32_N199,
    EXISTENCE2_ENERGY_N199,
    LAMBDA1_P3_N199,
    LAMBDA1_Q2_N199,
    SHOOT_ZERO_SLOPE_32,
)


class TestFlux:
    def test_examples(self):
        assert flux(1.0, 3, 2) == 2.0
        assert flux_inverse(2.0, 3, 2) == pytest.approx(1.0, abs=1e-13)
        assert flux_inverse(6.0, 3, 2) == pytest.approx(2.0, abs=1e-13)
        assert flux_inverse(0.0, 3, 2) == 0.0

    def test_order_required(self):
        with pytest.raises(ValueError):
            flux_inverse(1.0, 2, 2)

    @given(st.floats(-1e6, 1e6), st.floats(1.2, 6), st.floats(0.1, 0.95))
    def test_inverse_roundtrip_and_oddness(self, w, p, frac):
        q = 1 + frac * (p - 1)
        # below Ψ(smallest normal double) the preimage is not representable
        assume(abs(w) == 0 or abs(w) > flux(np.finfo(float).tiny, p, q))
        s = flux_inverse(w, p, q)
        assert abs(flux(s, p, q) - w) <= max(1e-13, 4 * np.finfo(float).eps * abs(w)) * 4
        assert flux_inverse(-w, p, q) == -s

    @given(st.floats(-50, 50), st.floats(-50, 50))
    def test_monotone(self, a, b):
        if a < b:
            assert flux(a, 3.5, 1.4) < flux(b, 3.5, 1.4)


class TestShoot:
    def test_zero_data(self, grid):
        end, traj = shoot(Params(3, 2, 5, 5), grid.zeros(), 0.0)
        assert end == 0.0 and traj.sup() == 0.0

    @given(st.floats(0.01, 20))
    def test_odd_without_source(self, s):
        grid = Grid1D(99)
        params = Params(3, 2, 12.0, 4.0)
        assert shoot(params, grid.zeros(), -s)[0] == -shoot(params, grid.zeros(), s)[0]

    def test_monotone_endpoint_unique_zero(self, fine_grid):
        f, params = fine_grid.constant(1.0), Params(3, 2)
        slopes = np.linspace(-3, 3, 61)
        ends = [shoot(params, f, s)[0] for s in slopes]
        assert all(b > a for a, b in zip(ends, ends[1:]))
        root = brentq(lambda s: shoot(params, f, s)[0], 0.1, 1.0, xtol=1e-15)
        assert root == pytest.approx(SHOOT_ZERO_SLOPE_32, abs=1e-9)
        # the recorded slope is the root of the discrete map, one half cell off
        (rec,) = find_solutions(params, f, (-3, 3), 61)
        assert rec.slope0 == pytest.approx(SHOOT_ZERO_SLOPE_32, abs=fine_grid.h)

    def test_blowup_sentinel(self, grid):
        end, traj = shoot(Params(3, 2, -1e5, 0), grid.constant(1.0), 100.0)
        assert math.isinf(end) and traj is None

    def test_march_reproduces_discrete_equation(self, grid, one):
        params = Params(3, 2, 5.0, 2.0)
        _, traj = march(params, one, 0.7)
        g = energy_gradient(traj, params, one).values
        assert np.max(np.abs(g[:-1])) < 1e-9


class TestFindSolutions:
    def test_positive_in_coercive_region(self, grid, one):
        sols = find_solutions(Params(3, 2, LAMBDA1_P3_N199 - 1, LAMBDA1_Q2_N199 - 1), one)
        assert sols and all(r.sign is SignClass.POSITIVE for r in sols)

    def test_no_nonnegative_above_alpha_star(self, grid, one):
        sols = find_solutions(Params(3, 2, ALPHA_STAR_32_N199 + 2, LAMBDA1_Q2_N199 + 2), one)
        assert all(r.sign in (SignClass.NEGATIVE, SignClass.NONPOSITIVE, SignClass.SIGN_CHANGING)
                   for r in sols)

    @pytest.mark.parametrize("ab", [(0, 0), (40, 20), (100, 0), (0, 30)])
    def test_zero_solution_without_source(self, grid, ab):
        sols = find_solutions(Params(3, 2, *ab), grid.zeros())
        assert any(r.sign is SignClass.ZERO for r in sols)

    @pytest.mark.parametrize("ab", [(100, 0), (0, 30)])
    def test_negation_symmetry_without_source(self, grid, ab):
        sols = find_solutions(Params(3, 2, *ab), grid.zeros())
        assert len(sols) == 3
        for r in sols:
            assert any(np.max(np.abs(r.u.values + s.u.values)) < 1e-8 * (1 + r.u.sup()) for s in sols)

    @pytest.mark.parametrize("ab", [(0, 0), (20, 9), (100, 0)])
    def test_refinement_stable_count(self, grid, ab):
        f = grid.constant(1.0) if ab != (100, 0) else grid.zeros()
        params = Params(3, 2, *ab)
        assert len(find_solutions(params, f, scan_count=241)) == len(find_solutions(params, f, scan_count=481))

    def test_record_invariants(self, grid, one):
        params = Params(3, 2, 10.0, 5.0)
        for r in find_solutions(params, one):
            assert r.residual <= 1e-9
            assert r.sign is classify_sign(r.u)
            assert residual(r.u, params, one) <= 1e-8
            assert np.max(np.abs(energy_gradient(r.u, params, one).values)) <= 1e-8 * (1 + r.u.sup())
            json.dumps(r.to_dict())

    def test_sorted_by_slope(self, grid):
        sols = find_solutions(Params(3, 2, 100, 0), grid.zeros())
        assert [r.slope0 for r in sols] == sorted(r.slope0 for r in sols)

    def test_bad_scan(self, grid, one):
        with pytest.raises(ValueError):
            find_solutions(Params(3, 2), one, (1, -1))
        with pytest.raises(ValueError):
            find_solutions(Params(3, 2), one, scan_count=1)


class TestMinimize:
    @pytest.mark.parametrize("ab", [(0, 0), (10, 5), (-50, -20), (27, 3)])
    def test_agrees_with_shooting(self, grid, one, ab):
        params = Params(3, 2, *ab)
        (shot,) = find_solutions(params, one)
        m = minimize_energy(params, one, grid.zeros())
        assert m.method == "minimization"
        assert np.max(np.abs(m.u.values - shot.u.values)) <= 1e-4

    def test_zero_source_gives_zero(self, grid):
        m = minimize_energy(Params(3, 2, 5, 2), grid.zeros(), grid.sample(lambda x: np.sin(np.pi * x)))
        assert m.u.sup() < 1e-6

    def test_existence_regime_regression(self):
        grid = Grid1D(199)
        p, q = 5.0, 2.0
        pair = first_eigenpair(p, grid)
        params = Params(p, q, pair.lam, beta_star(p, q, grid))
        bump = grid.sample(lambda x: np.exp(-((x - 0.3) / 0.1) ** 2))
        m = minimize_energy(params, bump, grid.zeros())
        assert m.energy.E == pytest.approx(EXISTENCE2_ENERGY_N199, rel=1e-8)
        assert abs(pairing(orthogonalize_source(bump, pair.phi), pair.phi)) < 1e-15

    def test_budget_exhausted(self, grid, one):
        with pytest.raises(ConvergenceError):
            minimize_energy(Params(3, 2, 10, 5), one, grid.zeros(), MinimizeBudget(max_iter=1))


class TestFibering:
    def test_polynomial_examples(self):
        assert q_eval(0, 1, -2, 1, 3, 2) == 0
        assert q_eval(1, 1, -2, 1, 3, 2) == 0
        assert q_prime(1, 1, -2, 1, 3, 2) == 0
        with pytest.raises(ValueError):
            q_eval(-1, 1, 1, 1, 3, 2)

    def test_factorization_case(self):
        tp = tangency(1.0, 1.0, 3, 2)
        assert tp.t_star == pytest.approx(1.0, rel=1e-15)
        assert tp.G_tilde == pytest.approx(-2.0, rel=1e-15)
        for t in np.linspace(0, 3, 13):
            assert q_eval(t, 1, tp.G_tilde, 1, 3, 2) == pytest.approx(t * (t - 1) ** 2, abs=1e-14)

    def test_random_double_roots(self, rng):
        worst = 0.0
        for _ in range(1000):
            p = rng.uniform(1.2, 8)
            q = rng.uniform(1.05, p - 0.05)
            H, F = 10 ** rng.uniform(-3, 3, 2)
            worst = max(worst, *tangency_residuals(H, F, p, q))
        assert worst <= 1e-9

    def test_scaling_in_F(self):
        assert tangency(1.0, 8.0, 3, 2).t_star == pytest.approx(math.sqrt(8), rel=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            tangency(0.0, 1.0, 3, 2)
        with pytest.raises(DomainError):
            tangency(1.0, -1.0, 3, 2)

    def test_beta_tilde_is_phi_plus(self, grid, one):
        u = grid.sample(lambda x: np.sin(np.pi * x))
        params = Params(3, 2, 5.0)
        assert tangency_for(u, params, one).beta_tilde == pytest.approx(phi_plus(u, params, one), rel=1e-12)


class TestPicone:
    def test_equality_case(self, grid, eig):
        u = eig(3.0).phi
        assert abs(picone_classical_gap(u, u, 3)) <= 1e-12
        assert abs(picone_generalized_gap(u, u, 3, 2)) <= 1e-12

    def test_eigenfunction_pair_fine_grid(self, fine_grid):
        phi_p = first_eigenpair(3, fine_grid).phi
        phi_q = first_eigenpair(2, fine_grid).phi
        assert picone_classical_gap(phi_p, phi_q, 3) >= -1e-6
        assert picone_generalized_gap(phi_p, phi_q, 3, 2) >= -1e-6

    def test_random_pairs(self, grid, rng):
        x = grid.x
        modes = np.sin(np.outer([1, 2, 3], np.pi * x))
        gaps = []
        for _ in range(100):
            u = GridFunction(grid, x * (1 - x) * np.exp(rng.normal(size=3) @ modes))
            v = GridFunction(grid, rng.uniform(0.1, 10) * x * (1 - x) * np.exp(rng.normal(size=3) @ modes))
            p = rng.uniform(2, 5)
            q = rng.uniform(1.2, p - 0.1)
            gaps += [picone_classical_gap(u, v, p), picone_generalized_gap(u, v, p, q)]
        assert min(gaps) >= -1e-6

    def test_domain(self, grid, eig):
        u = eig(3.0).phi
        with pytest.raises(DomainError):
            picone_classical_gap(u - u, u, 3)
        with pytest.raises(DomainError):
            picone_generalized_gap(u, -u, 3, 2)


@pytest.fixture(scope="module")
def ctx():
    return CurvesContext(
        p=3, q=2, lambda1_p=LAMBDA1_P3_N199, lambda1_q=LAMBDA1_Q2_N199,
        alpha_star=ALPHA_STAR_32_N199, beta_star=BETA_STAR_32_N199,
        beta_f_samples=((0.0, 21.2), (20.0, 14.0), (LAMBDA1_P3_N199, 10.33), (40.0, 10.26)),
        beta_sup_f_samples=((LAMBDA1_P3_N199, 10.33), (40.0, 14.2)),
    )


class TestSignTheorems:
    def test_sample_points(self, ctx, one):
        points = [(0.0, 5.0), (LAMBDA1_P3_N199 + 0.3, 5.0), (35.0, 12.0), (29.5, 12.0), (29.5, 5.0)]
        rows = verify_sign_theorems(points, one, ctx)
        names = {r.theorem for r in rows}
        assert {"all_positive", "definite_sign_near_lambda1", "no_nonneg_above_ps", "no_nonneg_above_alpha_star", "negative_part_H_negative", "positive_part_H_positive"} <= names
        assert all(r.passed for r in rows)
        assert all(r.solutions >= 1 for r in rows if r.theorem == "all_positive")
        json.dumps([r.to_dict() for r in rows])

    def test_source_checked(self, ctx, grid):
        with pytest.raises(DomainError):
            verify_sign_theorems([(0.0, 0.0)], grid.zeros(), ctx)

    def test_probe_epsilon(self, ctx, one):
        eps = probe_epsilon(35.0, ctx, one, steps=4, scan_count=121)
        assert 0 <= eps <= 2.0
        with pytest.raises(DomainError):
            probe_epsilon(20.0, ctx, one)
