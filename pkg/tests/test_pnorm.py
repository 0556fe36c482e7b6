import numpy as np
import pytest

from epp.basis import build_dct_basis, build_svd_basis
from epp.multigrid import WeightedDiffusion, mg_setup
from epp.operators import apply_blur, blur_from_psf, make_custom_psf, make_gaussian_psf
from epp.phantom import shapes_phantom, step_phantom
from epp.pipeline import solve_projected
from epp.pnorm import (CorrectionProblem, IrlsOptions, gmres_right, irls_weights, line_search,
                       pnorm, solve_correction)
from epp.select import choose_k, gcv_curve, spectral_coefficients
from oracles import dense_basis, dense_correction_ls, dense_gradient, gradient_descent_pnorm


def smooth_blur_problem(m, seed, noise=0.01):
    """Nonsymmetric separable smooth blur, SVD basis, GCV-chosen ``k``.

    A doubly symmetric blur would make the DCT diagonalize ``L^T L`` as
    well, and the p=2 correction would then vanish identically.
    """
    r = np.random.default_rng(seed)
    g = np.exp(-0.5 * ((np.arange(5) - 2) / 1.2) ** 2)
    kern = np.outer(g * (1 + 0.6 * r.random(5)), g * (1 + 0.6 * r.random(5)))
    blur = blur_from_psf(make_custom_psf(kern), m)
    basis = build_svd_basis(blur)
    truth = step_phantom(m) if seed % 2 else shapes_phantom(m)
    b = apply_blur(blur, truth)
    b = b + noise * np.linalg.norm(b) / m * r.standard_normal((m, m))
    k = choose_k(gcv_curve(spectral_coefficients(basis, blur, b), m * m // 2))
    y_k = solve_projected(blur, basis, k, b)
    return blur, basis, k, y_k


class TestWeights:
    def test_unit_residual(self):
        for p in (1.1, 1.5, 2.0):
            w, w2 = irls_weights([1.0, 1.0], p)
            np.testing.assert_array_equal(w, [1.0, 1.0])

    def test_closed_form(self):
        w, w2 = irls_weights([1.0, 4.0], 1.5)
        np.testing.assert_allclose(w, [1.0, 4.0**-0.25])
        assert w[1] == pytest.approx(0.70711, abs=1e-5)
        np.testing.assert_allclose(w2, w**2)

    def test_zero_entry_floored(self):
        r = np.array([0.0, -3.0, 2.0])
        w, _ = irls_weights(r, 1.2, floor=1e-8)
        assert w[0] == pytest.approx((1e-8 * 3.0) ** -0.4)
        assert np.all(np.isfinite(w))

    def test_all_zero(self):
        w, _ = irls_weights(np.zeros(4), 1.3, floor=1e-6)
        np.testing.assert_allclose(w, (1e-6) ** -0.35)

    def test_bad_floor(self):
        with pytest.raises(ValueError):
            irls_weights([1.0], 1.5, floor=0)


class TestLineSearch:
    def test_quadratic(self):
        a, f = line_search(lambda t: (t - 1) ** 2)
        assert abs(a - 1) <= 1e-4 and f == pytest.approx((a - 1) ** 2)

    def test_increasing(self):
        obj = lambda t: t + 0.5
        a, f = line_search(obj)
        assert a <= 1e-4 and f <= obj(0)

    def test_kinked(self):
        a, _ = line_search(lambda t: abs(1 - t) ** 1.5 + abs(1 - t))
        assert abs(a - 1) <= 1e-4

    def test_never_worse_than_zero(self, rng):
        for _ in range(20):
            c = rng.uniform(-1, 3)
            obj = lambda t: abs(t - c) ** 1.1
            a, f = line_search(obj)
            assert f <= obj(0.0)


class TestGmres:
    def test_identity(self, rng):
        b = rng.standard_normal(7)
        res = gmres_right(lambda v: v, lambda v: v, b)
        np.testing.assert_allclose(res.solution, b)
        assert res.iterations == 1 and res.converged

    def test_diagonal(self):
        d = np.arange(1.0, 11.0)
        res = gmres_right(lambda v: d * v, None, np.ones(10), tol=1e-10)
        np.testing.assert_allclose(res.solution, 1.0 / d, atol=1e-8)

    def test_exact_preconditioner(self, rng):
        B = rng.standard_normal((20, 20))
        A = B @ B.T + 20 * np.eye(20)
        Ainv = np.linalg.inv(A)
        res = gmres_right(lambda v: A @ v, lambda v: Ainv @ v, rng.standard_normal(20), tol=1e-10)
        assert res.iterations == 1 and res.converged

    def test_reported_residual_is_true_residual(self, rng):
        B = rng.standard_normal((60, 60))
        A = B + 8 * np.eye(60)
        M = np.diag(1.0 / np.diag(A))
        b = rng.standard_normal(60)
        for tol, restart, max_iter in ((1e-3, 5, 7), (1e-8, 10, 200), (1e-12, 60, 60)):
            res = gmres_right(lambda v: A @ v, lambda v: M @ v, b, tol, restart, max_iter)
            true = np.linalg.norm(b - A @ res.solution) / np.linalg.norm(b)
            assert abs(true - res.residual) <= 1e-10
            assert res.iterations <= max_iter

    def test_budget_exhaustion_reported(self, rng):
        A = rng.standard_normal((40, 40)) + np.eye(40)
        res = gmres_right(lambda v: A @ v, None, rng.standard_normal(40), 1e-12, restart=3, max_iter=6)
        assert not res.converged and res.iterations == 6

    def test_zero_rhs(self):
        res = gmres_right(lambda v: v, None, np.zeros(3))
        assert res.converged and np.all(res.solution == 0)

    def test_warm_start(self, rng):
        A = np.diag(np.arange(1.0, 6.0))
        b = np.ones(5)
        x0 = np.linalg.solve(A, b)
        res = gmres_right(lambda v: A @ v, None, b, tol=1e-10, x0=x0)
        assert res.iterations == 0


class TestCorrectionProblem:
    def test_normal_operator_self_adjoint(self, rng):
        blur, basis, k, y_k = smooth_blur_problem(12, 0)
        prob = CorrectionProblem(basis, k, y_k)
        d2 = np.exp(rng.uniform(-3, 3, 2 * 12 * 11))
        op = prob.normal_operator(WeightedDiffusion(12, d2))
        u, v = rng.standard_normal((2, prob.size))
        assert abs(np.vdot(op(u), v) - np.vdot(u, op(v))) <= 1e-10 * np.linalg.norm(u) * np.linalg.norm(v)

    def test_normal_operator_dense(self, rng):
        blur, basis, k, y_k = smooth_blur_problem(8, 1)
        prob = CorrectionProblem(basis, k, y_k)
        d2 = rng.random(2 * 8 * 7) + 0.1
        W = dense_basis(basis)
        L = dense_gradient(8)
        W0 = W[:, k:]
        dense = W0.T @ L.T @ np.diag(d2) @ L @ W0
        v = rng.standard_normal(prob.size)
        diff = WeightedDiffusion(8, d2)
        np.testing.assert_allclose(prob.normal_operator(diff)(v), dense @ v, atol=1e-10)
        rhs = -W0.T @ L.T @ np.diag(d2) @ L @ W[:, :k] @ y_k
        np.testing.assert_allclose(prob.normal_rhs(diff), rhs, atol=1e-10)

    def test_preconditioner_is_linear(self, rng):
        blur, basis, k, y_k = smooth_blur_problem(12, 0)
        prob = CorrectionProblem(basis, k, y_k)
        prec = prob.preconditioner(mg_setup(WeightedDiffusion(12, rng.random(264) + 0.1)))
        u, v = rng.standard_normal((2, prob.size))
        np.testing.assert_allclose(prec(2 * u - v), 2 * prec(u) - prec(v), atol=1e-10)


class TestSolveCorrection:
    def test_constant_head_is_optimal(self):
        blur = blur_from_psf(make_gaussian_psf(1.0), 8)
        basis = build_dct_basis(blur)
        y_k = np.zeros(5)
        y_k[0] = 3.0
        y0, trace = solve_correction(blur, basis, 5, y_k)
        assert trace.iterations == 0 and trace.final_objective == 0 and trace.converged
        assert np.all(y0 == 0)

    def test_dct_p2_correction_vanishes(self, rng):
        # the DCT also diagonalizes L^T L under reflexive boundaries
        blur = blur_from_psf(make_gaussian_psf(1.0), 16)
        basis = build_dct_basis(blur)
        y_k = basis.forward(rng.random((16, 16)))[:60]
        W = dense_basis(basis)
        y_ls, _, _ = dense_correction_ls(dense_gradient(16), W, 60, y_k)
        assert np.linalg.norm(y_ls) < 1e-12
        y0, _ = solve_correction(blur, basis, 60, y_k, IrlsOptions(p=2.0))
        assert np.linalg.norm(y0) < 1e-10

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_p2_matches_dense_least_squares(self, seed):
        blur, basis, k, y_k = smooth_blur_problem(8, seed)
        y_ls, M, c = dense_correction_ls(dense_gradient(8), dense_basis(basis), k, y_k)
        y0, trace = solve_correction(blur, basis, k, y_k, IrlsOptions(p=2.0))
        assert np.linalg.norm(y0 - y_ls) <= 1e-6 * np.linalg.norm(y_ls)

    def test_near_two_close_to_least_squares_image(self):
        blur, basis, k, y_k = smooth_blur_problem(8, 0)
        W = dense_basis(basis)
        y_ls, _, _ = dense_correction_ls(dense_gradient(8), W, k, y_k)
        y0, _ = solve_correction(blur, basis, k, y_k, IrlsOptions(p=1.999))
        x_ls = W[:, :k] @ y_k + W[:, k:] @ y_ls
        assert np.linalg.norm(W[:, k:] @ (y0 - y_ls)) <= 1e-4 * np.linalg.norm(x_ls)

    def test_matches_gradient_descent(self):
        blur, basis, k, y_k = smooth_blur_problem(8, 1)
        W = dense_basis(basis)
        _, M, c = dense_correction_ls(dense_gradient(8), W, k, y_k)
        y0, trace = solve_correction(blur, basis, k, y_k, IrlsOptions(p=1.3))
        f_gd, _ = gradient_descent_pnorm(M, c, 1.3, steps=100_000)
        assert trace.final_objective <= f_gd * (1 + 1e-4)
        assert pnorm(M @ y0 + c, 1.3) == pytest.approx(trace.final_objective, rel=1e-12)

    @pytest.mark.parametrize("p", [1.01, 1.2, 1.6])
    def test_trace_invariants(self, p):
        blur, basis, k, y_k = smooth_blur_problem(16, 3)
        y0, trace = solve_correction(blur, basis, k, y_k, IrlsOptions(p=p))
        obj = np.array(trace.objectives)
        assert np.all(np.diff(obj) <= 1e-12 * obj[:-1])
        assert trace.iterations <= 30
        # correction stays in the complement of S_k
        x0 = basis.tail_image(y0)
        assert np.linalg.norm(basis.forward(x0)[:k]) <= 1e-10 * max(np.linalg.norm(x0), 1e-300)
        s = trace.summary()
        assert s["irls_iterations"] == len(s["gmres_iterations"]) == trace.iterations
        assert all(0 <= a <= 2 for a in s["line_search_alpha"])

    def test_unpreconditioned_path(self):
        blur, basis, k, y_k = smooth_blur_problem(8, 2)
        a, ta = solve_correction(blur, basis, k, y_k, IrlsOptions(p=1.5))
        b, tb = solve_correction(blur, basis, k, y_k, IrlsOptions(p=1.5, precondition=False))
        assert tb.final_objective == pytest.approx(ta.final_objective, rel=1e-3)

    def test_options_validation(self):
        for bad in (dict(p=1.0), dict(p=2.5), dict(outer_tol=0), dict(inner_tol=-1),
                    dict(max_outer=-1), dict(mg_cycles=0), dict(mg_interpolation="cubic")):
            with pytest.raises(ValueError):
                IrlsOptions(**bad)
        IrlsOptions(p=2.0)
