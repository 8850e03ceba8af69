import dataclasses

import numpy as np
import pytest

from jointscreen import (
    ConvergenceError,
    DivergenceError,
    InfeasibleDualError,
    Observation,
    Problem,
    dual_feasible_point,
    dual_objective,
    duality_gap,
    fista_step,
    gap_safe_sphere,
    initial_state,
    lambda_max,
    primal_objective,
    reference_solve,
    solve,
    unit_normalize,
)
from jointscreen.solver import default_step_size

from conftest import random_dictionary, sparse_instance


def identity_problem(y, lam):
    return Problem(unit_normalize(np.eye(len(y))), Observation(np.asarray(y, dtype=float)), lam)


class TestFistaStep:
    def test_zero_data_is_fixed_point(self):
        p = identity_problem([0.0, 0.0], 0.5)
        state = initial_state(p)
        for _ in range(5):
            state = fista_step(state, p)
        np.testing.assert_array_equal(state.x, 0.0)

    def test_converges_to_zero_at_lambda_max(self, rng):
        d, obs, _ = sparse_instance(rng, 6, 15, 3)
        p = Problem(d, obs, 1.05 * lambda_max(d, obs))
        state = initial_state(p, x0=np.abs(rng.normal(size=15)))
        for _ in range(600):
            state = fista_step(state, p)
        assert np.abs(state.x).max() <= 1e-8

    def test_orthonormal_closed_form(self):
        p = identity_problem([2.0, -1.0], 0.5)
        state = initial_state(p)
        for _ in range(200):
            state = fista_step(state, p)
        np.testing.assert_allclose(state.x, [1.5, 0.0], atol=1e-10)

    def test_residual_cache_tracks_iterate(self, rng):
        d, obs, _ = sparse_instance(rng, 5, 12, 2)
        p = Problem(d, obs, 0.3)
        state = initial_state(p)
        for _ in range(20):
            state = fista_step(state, p)
            np.testing.assert_allclose(state.residual, obs.y - d.atoms @ state.x, atol=1e-10)

    def test_plain_proximal_companion_is_monotone(self, rng):
        # pinning the momentum at 1 turns the step into plain proximal descent
        d, obs, _ = sparse_instance(rng, 8, 20, 4)
        p = Problem(d, obs, 0.2)
        state = initial_state(p)
        previous = primal_objective(p, state.x)
        for _ in range(150):
            state = dataclasses.replace(fista_step(state, p), momentum=1.0)
            current = primal_objective(p, state.x)
            assert current <= previous + 1e-12
            previous = current

    def test_oversized_step_diverges(self, rng):
        d, obs, _ = sparse_instance(rng, 6, 40, 3)
        p = Problem(d, obs, 0.01)
        state = initial_state(p, step_size=1e12)
        with pytest.raises(DivergenceError):
            for _ in range(2000):
                state = fista_step(state, p)

    def test_default_step_respects_spectral_bound(self, rng):
        d = random_dictionary(rng, 10, 40)
        step = default_step_size(d)
        assert step <= 1.0 / np.linalg.norm(d.atoms, 2) ** 2 + 1e-12


class TestDualFeasiblePoint:
    def test_exact_optimum_recovers_dual_solution(self, rng):
        d, obs, _ = sparse_instance(rng, 8, 20, 3)
        lam = 0.4 * lambda_max(d, obs)
        p = Problem(d, obs, lam)
        x_star = reference_solve(p, 1e-13)
        theta = dual_feasible_point(p, x_star)
        np.testing.assert_allclose(theta.theta, (obs.y - d.atoms @ x_star.x) / lam, atol=1e-9)

    def test_zero_point_above_lambda_max(self, rng):
        d, obs, _ = sparse_instance(rng, 6, 12, 2)
        lam = 1.5 * lambda_max(d, obs)
        theta = dual_feasible_point(Problem(d, obs, lam), np.zeros(12))
        np.testing.assert_allclose(theta.theta, obs.y / lam)

    def test_always_feasible(self, rng):
        for _ in range(30):
            m, n = int(rng.integers(3, 9)), int(rng.integers(5, 25))
            d = random_dictionary(rng, m, n)
            p = Problem(d, Observation(rng.normal(size=m)), float(rng.uniform(0.01, 2)))
            x = np.abs(rng.normal(size=n)) * (rng.random(n) < 0.5)
            theta = dual_feasible_point(p, x)
            assert max(float(np.dot(d.column(i), theta.theta)) for i in range(n)) <= 1 + 1e-12


class TestDualityGap:
    def test_zero_at_optimum(self, rng):
        d, obs, _ = sparse_instance(rng, 8, 20, 3)
        p = Problem(d, obs, 0.3 * lambda_max(d, obs))
        x_star = reference_solve(p, 1e-13)
        theta = dual_feasible_point(p, x_star)
        assert duality_gap(p, x_star, theta) <= 1e-9

    def test_matches_direct_objective_difference(self, rng):
        d, obs, _ = sparse_instance(rng, 5, 10, 2)
        lam_top = lambda_max(d, obs)
        for lam in (0.5 * lam_top, 2.0 * lam_top):
            p = Problem(d, obs, lam)
            x = np.zeros(10)
            theta = dual_feasible_point(p, x)
            expected = primal_objective(p, x) - dual_objective(p, theta.theta)
            assert duality_gap(p, x, theta) == pytest.approx(expected, abs=1e-15)

    def test_nonnegative_for_feasible_pairs(self, rng):
        for _ in range(40):
            m, n = int(rng.integers(3, 8)), int(rng.integers(4, 20))
            d = random_dictionary(rng, m, n)
            p = Problem(d, Observation(rng.normal(size=m)), float(rng.uniform(0.05, 1.5)))
            x = np.abs(rng.normal(size=n)) * (rng.random(n) < 0.4)
            assert duality_gap(p, x, dual_feasible_point(p, x)) >= 0.0

    def test_rejects_infeasible_theta(self, rng):
        d, obs, _ = sparse_instance(rng, 4, 9, 2)
        p = Problem(d, obs, 0.5)
        theta = 10.0 * d.column(0)
        with pytest.raises(InfeasibleDualError):
            duality_gap(p, np.zeros(9), theta)


class TestGapSafeSphere:
    def test_degenerates_to_point_at_optimum(self, rng):
        d, obs, _ = sparse_instance(rng, 8, 20, 3)
        p = Problem(d, obs, 0.3 * lambda_max(d, obs))
        x_star = reference_solve(p, 1e-14)
        sphere = gap_safe_sphere(p, x_star, dual_feasible_point(p, x_star))
        assert sphere.radius <= 1e-6

    def test_tau_bounded_by_center_norm_below_lambda_max(self, rng):
        d, obs, _ = sparse_instance(rng, 10, 30, 4)
        p = Problem(d, obs, 0.35 * lambda_max(d, obs))
        spheres = []
        solve(p, gap_tolerance=1e-10, callback=lambda s, sp: spheres.append(sp))
        assert spheres
        for sphere in spheres:
            assert sphere.tau <= np.linalg.norm(sphere.center) + 1e-12

    def test_contains_high_precision_dual_optimum(self, rng):
        d, obs, _ = sparse_instance(rng, 9, 25, 3)
        p = Problem(d, obs, 0.4 * lambda_max(d, obs))
        x_star = reference_solve(p, 1e-14)
        theta_star = dual_feasible_point(p, x_star).theta
        spheres = []
        solve(p, gap_tolerance=1e-10, callback=lambda s, sp: spheres.append(sp))
        for sphere in spheres:
            assert sphere.contains(theta_star, slack=1e-9)


class TestSolve:
    def test_zero_solution_at_lambda_max(self, rng):
        d, obs, _ = sparse_instance(rng, 6, 15, 3)
        res = solve(Problem(d, obs, lambda_max(d, obs)), gap_tolerance=1e-10)
        np.testing.assert_array_equal(res.x.x, 0.0)

    def test_orthonormal_closed_form(self):
        res = solve(identity_problem([2.0, -1.0], 0.5), gap_tolerance=1e-12)
        np.testing.assert_allclose(res.x.x, [1.5, 0.0], atol=1e-6)

    def test_kkt_residuals_at_convergence(self, rng):
        d, obs, _ = sparse_instance(rng, 12, 40, 5)
        p = Problem(d, obs, 0.25 * lambda_max(d, obs))
        res = solve(p, gap_tolerance=1e-9, max_iters=50_000)
        slack = 1.0 - d.atoms.T @ res.theta.theta
        assert float(np.minimum(res.x.x, slack).max()) <= 1e-6

    def test_callback_spheres_match_public_operations(self, rng):
        d, obs, _ = sparse_instance(rng, 7, 18, 3)
        p = Problem(d, obs, 0.5 * lambda_max(d, obs))
        seen = []
        solve(p, gap_tolerance=1e-9, callback=lambda s, sp: seen.append((s, sp)))
        for state, sphere in seen[:: max(1, len(seen) // 10)]:
            theta = dual_feasible_point(p, state.x)
            recomputed = gap_safe_sphere(p, state.x, theta)
            np.testing.assert_allclose(sphere.center, theta.theta, atol=1e-12)
            assert sphere.tau == pytest.approx(recomputed.tau, abs=1e-10)

    def test_intermediate_spheres_contain_final_dual_point(self, rng):
        for _ in range(50):
            d, obs, _ = sparse_instance(rng, 20, 100, 5)
            p = Problem(d, obs, float(rng.uniform(0.2, 0.9)) * lambda_max(d, obs))
            spheres = []
            res = solve(
                p, gap_tolerance=1e-12, max_iters=20_000,
                callback=lambda s, sp: spheres.append(sp),
            )
            theta_final = res.theta.theta
            for sphere in spheres:
                assert np.linalg.norm(theta_final - sphere.center) <= sphere.radius + 1e-9

    def test_nonconvergence_reports_final_gap(self, rng):
        d, obs, _ = sparse_instance(rng, 6, 15, 3)
        p = Problem(d, obs, 0.1 * lambda_max(d, obs))
        with pytest.raises(ConvergenceError) as err:
            solve(p, gap_tolerance=1e-14, max_iters=3)
        assert err.value.gap > 1e-14
        assert err.value.result.iterations == 3

    def test_screening_feedback_preserves_solution(self, rng):
        d, obs, _ = sparse_instance(rng, 10, 30, 4)
        p = Problem(d, obs, 0.3 * lambda_max(d, obs))
        plain = solve(p, gap_tolerance=1e-11, max_iters=50_000)

        def feedback(state, sphere):
            return d.atoms.T @ sphere.center < sphere.tau

        fed = solve(p, gap_tolerance=1e-11, max_iters=50_000, callback=feedback)
        np.testing.assert_allclose(fed.x.x, plain.x.x, atol=1e-5)
        assert fed.gap <= 1e-11
