import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given
from hypothesis import settings as hypothesis_settings
from hypothesis import strategies as st

from .calculus import (
    biot_savart,
    compose_analytic,
    binomial_series,
    curl,
    derivative,
    divergence_residual,
    gradient,
    helmholtz_decompose,
    laplacian,
    leray_project,
    mean,
    multiply,
    solve_poisson,
)
from .fourier import SpectralException, SpectralField, evaluate_at, get_plan
from .norms import AnalyticNormParams, analytic_norm, shrinking_norm
from .snapshots import read_snapshot, write_grid_csv, write_snapshot
from .testing import random_divergence_free, random_field

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def trig(dim, cutoff, *terms, const=0.0):
    return SpectralField.from_terms(dim, cutoff, [(const, list(terms))])


class SpectralFieldTestCase(SimpleTestCase):
    def test_cos_at_origin(self):
        f = trig(2, 4, ("cos", (1, 0), 1.0))
        self.assertAlmostEqual(evaluate_at(f, [[0.0, 0.0]])[0, 0], 1.0, places=14)

    def test_constant_everywhere(self):
        f = SpectralField.constant(2, 3, [2.5])
        points = np.random.default_rng(1).uniform(0, 2 * np.pi, size=(20, 2))
        np.testing.assert_allclose(evaluate_at(f, points)[:, 0], 2.5, atol=1e-14)

    def test_evaluate_matches_grid_transform(self):
        rng = np.random.default_rng(7)
        for dim in (1, 2, 3):
            f = random_field(rng, dim, 4, components=2)
            points = f.plan.grid_points()
            expected = f.to_grid().reshape(2, -1).T
            np.testing.assert_allclose(evaluate_at(f, points), expected, atol=1e-12)

    def test_grid_round_trip(self):
        f = random_field(np.random.default_rng(3), 2, 5, components=2)
        back = SpectralField.from_grid(f.to_grid(), f.cutoff)
        np.testing.assert_allclose(back.coeffs, f.coeffs, atol=1e-13)

    def test_sin_coefficients(self):
        f = trig(1, 2, ("sin", (1,), 2.0))
        self.assertAlmostEqual(f.coeffs[0, 3], -1j)
        self.assertAlmostEqual(f.coeffs[0, 1], 1j)
        self.assertAlmostEqual(evaluate_at(f, [[np.pi / 2]])[0, 0], 2.0, places=14)

    def test_mode_outside_box_rejected(self):
        with self.assertRaises(ValueError):
            trig(2, 2, ("cos", (3, 0), 1.0))

    def test_incompatible_fields(self):
        with self.assertRaises(SpectralException.DimensionMismatch):
            SpectralField.zeros(2, 3) + SpectralField.zeros(2, 4)

    def test_coefficients_are_read_only(self):
        f = SpectralField.zeros(1, 2)
        with self.assertRaises(ValueError):
            f.coeffs[0, 0] = 1.0

    def test_plan_is_cached(self):
        self.assertIs(get_plan(2, 6), get_plan(2, 6))


class AnalyticNormTestCase(SimpleTestCase):
    def setUp(self):
        self.params = AnalyticNormParams(delta=1.5, delta0=2.0, eta=1.0, beta=0.5, n_delta=4)

    def test_cos(self):
        self.assertAlmostEqual(analytic_norm(trig(2, 4, ("cos", (1, 0), 1.0)), 2.0), 2.0)

    def test_constant(self):
        self.assertAlmostEqual(analytic_norm(SpectralField.constant(3, 2, [-0.7]), 4.0), 0.7)

    def test_two_modes(self):
        f = trig(2, 4, ("cos", (1, 0), 1.0), ("cos", (2, 0), 1.0))
        self.assertAlmostEqual(analytic_norm(f, 1.5), 3.75)

    def test_vector_takes_max_component(self):
        f = SpectralField.constant(2, 2, [1.0, -3.0])
        self.assertAlmostEqual(analytic_norm(f, 1.2), 3.0)

    def test_radius_must_exceed_one(self):
        with self.assertRaises(SpectralException.InvalidRadius):
            analytic_norm(SpectralField.zeros(1, 2), 1.0)

    def test_params_validation(self):
        with self.assertRaises(SpectralException.InvalidRadius):
            AnalyticNormParams(delta=2.5, delta0=2.0, eta=1.0, beta=0.5)
        with self.assertRaises(ValueError):
            AnalyticNormParams(delta=1.5, delta0=2.0, eta=1.0, beta=1.0)

    def test_delta_grid_stays_above_one(self):
        grid = self.params.delta_grid()
        self.assertEqual(grid[0], 2.0)
        self.assertTrue(np.all(grid > 1))
        self.assertEqual(len(grid), 4)

    def test_shrinking_norm_constant(self):
        one = SpectralField.constant(2, 3, [1.0])
        traj = [(0.0, one), (0.2, one), (0.4, one)]
        self.assertAlmostEqual(shrinking_norm(traj, self.params), 1.0)

    def test_shrinking_norm_single_snapshot(self):
        f = trig(2, 3, ("cos", (1, 0), 1.0))
        value = shrinking_norm([(0.0, f)], self.params, deltas=[1.5])
        self.assertAlmostEqual(value, 1.5 + 0.5**0.5 * 1.5)

    def test_shrinking_norm_skips_late_samples(self):
        f = trig(2, 3, ("cos", (1, 0), 1.0))
        big = f * 100.0
        value = shrinking_norm([(0.0, f), (0.9, big)], self.params, deltas=[1.5])
        self.assertAlmostEqual(value, 1.5 + 0.5**0.5 * 1.5)

    def test_shrinking_norm_empty(self):
        with self.assertRaises(SpectralException.EmptyTrajectory):
            shrinking_norm([], self.params)


class CalculusTestCase(SimpleTestCase):
    def test_derivative_of_cos(self):
        d = derivative(trig(2, 3, ("cos", (1, 0), 1.0)), 0)
        np.testing.assert_allclose(d.coeffs, trig(2, 3, ("sin", (1, 0), -1.0)).coeffs)

    def test_derivative_of_constant(self):
        d = derivative(SpectralField.constant(2, 3, [4.0]), 1)
        self.assertEqual(np.max(np.abs(d.coeffs)), 0.0)

    def test_derivative_axis_range(self):
        with self.assertRaises(ValueError):
            derivative(SpectralField.zeros(2, 2), 2)

    @hypothesis_settings(max_examples=100, deadline=None)
    @given(seed=seeds)
    def test_derivative_loss(self, seed):
        f = random_field(np.random.default_rng(seed), 2, 8)
        for axis in (0, 1):
            lhs = analytic_norm(derivative(f, axis), 1.5)
            self.assertLessEqual(lhs, 2.0 / 0.5 * analytic_norm(f, 2.0) + 1e-10)

    def test_multiply_identity(self):
        g = random_field(np.random.default_rng(2), 2, 6, components=2)
        one = SpectralField.constant(2, 6, [1.0])
        np.testing.assert_allclose(multiply(one, g).coeffs, g.coeffs, atol=1e-13)

    def test_product_to_sum(self):
        f = trig(2, 4, ("cos", (1, 0), 1.0))
        expected = trig(2, 4, ("cos", (2, 0), 0.5), const=0.5)
        np.testing.assert_allclose(multiply(f, f).coeffs, expected.coeffs, atol=1e-14)

    def test_product_is_truncated_convolution(self):
        rng = np.random.default_rng(11)
        K = 3
        f, g = random_field(rng, 1, K), random_field(rng, 1, K)
        full = np.convolve(f.coeffs[0], g.coeffs[0])
        np.testing.assert_allclose(
            multiply(f, g).coeffs[0], full[K : 3 * K + 1], atol=1e-13
        )

    @hypothesis_settings(max_examples=100, deadline=None)
    @given(seed=seeds)
    def test_algebra_property(self, seed):
        rng = np.random.default_rng(seed)
        f, g = random_field(rng, 2, 8), random_field(rng, 2, 8)
        product = multiply(f, g)
        self.assertLess(product.reality_defect(), 1e-12)
        for delta in (1.2, 1.3, 1.5, 2.0):
            bound = analytic_norm(f, delta) * analytic_norm(g, delta)
            self.assertLessEqual(analytic_norm(product, delta), bound * (1 + 1e-10))

    def test_compose_identity(self):
        f = trig(2, 4, ("cos", (1, 0), 0.3))
        h = compose_analytic([0.0, 1.0], f, radius=10.0, n_terms=1)
        np.testing.assert_allclose(h.coeffs, f.coeffs, atol=1e-14)

    def test_compose_square(self):
        f = trig(2, 4, ("cos", (1, 0), 1.0))
        h = compose_analytic([0.0, 0.0, 1.0], f, radius=10.0, n_terms=2)
        expected = trig(2, 4, ("cos", (2, 0), 0.5), const=0.5)
        np.testing.assert_allclose(h.coeffs, expected.coeffs, atol=1e-14)

    def test_compose_inverse_square_root(self):
        f = SpectralField.constant(2, 3, [0.21])
        h = compose_analytic(binomial_series(-0.5), f, radius=1.0)
        self.assertAlmostEqual(mean(h)[0], 1 / 1.1, places=12)

    def test_compose_outside_radius(self):
        f = SpectralField.constant(1, 2, [1.5])
        with self.assertRaises(SpectralException.CompositionDomain):
            compose_analytic(binomial_series(-0.5), f, radius=1.0)


class PotentialTestCase(SimpleTestCase):
    def test_poisson_unit_mode(self):
        phi = solve_poisson(trig(2, 4, ("cos", (1, 0), 1.0), const=1.0))
        np.testing.assert_allclose(phi.coeffs, trig(2, 4, ("cos", (1, 0), 1.0)).coeffs)

    def test_poisson_uniform(self):
        phi = solve_poisson(SpectralField.constant(3, 2, [1.0]))
        self.assertEqual(np.max(np.abs(phi.coeffs)), 0.0)

    def test_poisson_second_mode(self):
        phi = solve_poisson(trig(2, 4, ("cos", (2, 0), 1.0), const=1.0))
        np.testing.assert_allclose(phi.coeffs, trig(2, 4, ("cos", (2, 0), 0.25)).coeffs)

    def test_poisson_rejects_charged_density(self):
        with self.assertRaises(SpectralException.NeutralityViolated):
            solve_poisson(SpectralField.constant(2, 2, [1.01]))

    def test_poisson_inverts_laplacian(self):
        rho = random_field(np.random.default_rng(5), 2, 6) * 0.1
        coeffs = rho.coeffs.copy()
        coeffs[(0,) + rho.plan.zero] = 1.0
        rho = SpectralField(coeffs)
        phi = solve_poisson(rho)
        self.assertAlmostEqual(mean(phi)[0], 0.0)
        np.testing.assert_allclose((-laplacian(phi)).coeffs, (rho - 1.0).coeffs, atol=1e-14)

    def test_leray_removes_gradient_mode(self):
        F = SpectralField.stack([trig(2, 3, ("cos", (1, 0), 1.0)), SpectralField.zeros(2, 3)])
        self.assertLess(np.max(np.abs(leray_project(F).coeffs)), 1e-15)

    def test_leray_keeps_transverse_mode(self):
        F = SpectralField.stack([SpectralField.zeros(2, 3), trig(2, 3, ("cos", (1, 0), 1.0))])
        np.testing.assert_allclose(leray_project(F).coeffs, F.coeffs)

    def test_leray_passes_mean(self):
        F = SpectralField.constant(3, 2, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(mean(leray_project(F)), [1.0, 2.0, 3.0])

    @hypothesis_settings(max_examples=100, deadline=None)
    @given(seed=seeds)
    def test_projection_properties(self, seed):
        rng = np.random.default_rng(seed)
        dim = 2 + seed % 2
        F = random_field(rng, dim, 5, components=dim)
        P = leray_project(F)
        self.assertLess(divergence_residual(P), 1e-12)
        np.testing.assert_allclose(leray_project(P).coeffs, P.coeffs, atol=1e-12)
        psi = random_field(rng, dim, 5)
        self.assertLess(np.max(np.abs(leray_project(gradient(psi)).coeffs)), 1e-12)
        grad_part, divfree_part = helmholtz_decompose(F)
        np.testing.assert_allclose((grad_part + divfree_part).coeffs, F.coeffs, atol=1e-12)

    def test_helmholtz_of_gradient(self):
        psi = random_field(np.random.default_rng(4), 2, 4)
        grad_part, divfree_part = helmholtz_decompose(gradient(psi))
        np.testing.assert_allclose(grad_part.coeffs, gradient(psi).coeffs, atol=1e-13)
        self.assertLess(np.max(np.abs(divfree_part.coeffs)), 1e-13)

    def test_biot_savart_constant(self):
        A = biot_savart(SpectralField.constant(3, 2, [0.5, 1.0, -2.0]))
        self.assertEqual(np.max(np.abs(A.coeffs)), 0.0)

    def test_biot_savart_single_mode(self):
        zero = SpectralField.zeros(3, 3)
        B = SpectralField.stack([zero, zero, trig(3, 3, ("cos", (1, 0, 0), 1.0))])
        A = biot_savart(B)
        np.testing.assert_allclose(curl(A).coeffs, B.coeffs, atol=1e-14)

    def test_biot_savart_rejects_divergent_field(self):
        zero = SpectralField.zeros(3, 3)
        B = SpectralField.stack([trig(3, 3, ("cos", (1, 0, 0), 1.0)), zero, zero])
        with self.assertRaises(SpectralException.NotDivergenceFree):
            biot_savart(B)

    @hypothesis_settings(max_examples=100, deadline=None)
    @given(seed=seeds)
    def test_biot_savart_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        dim = 2 + seed % 2
        B = random_divergence_free(rng, dim, 5) + 0.7
        A = biot_savart(B)
        np.testing.assert_allclose(curl(A).coeffs, (B - mean(B)[0]).coeffs, atol=1e-12)
        self.assertLess(divergence_residual(A), 1e-12)
        np.testing.assert_allclose(mean(A), 0.0, atol=1e-15)
        grad_sq = sum(derivative(A, a).l2_norm_sq() for a in range(dim))
        self.assertLessEqual(grad_sq, (B - mean(B)[0]).l2_norm_sq() * (1 + 1e-12))

    def test_mean(self):
        f = trig(2, 3, ("cos", (1, 0), 1.0), const=0.4)
        self.assertAlmostEqual(mean(f)[0], 0.4)
        self.assertEqual(mean(trig(2, 3, ("sin", (0, 1), 1.0)))[0], 0.0)

    def test_mean_of_random_field_is_real(self):
        f = random_field(np.random.default_rng(9), 3, 3)
        self.assertLess(abs(f.coeffs[(0,) + f.plan.zero].imag), 1e-14)


class SnapshotTestCase(SimpleTestCase):
    def test_snapshot_file(self):
        rng = np.random.default_rng(0)
        rho, xi = random_field(rng, 2, 3), random_field(rng, 2, 3, components=2)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_snapshot(Path(tmp) / "s.bin", {"rho": rho, "xi": xi}, t=0.25)
            header, fields = read_snapshot(path)
        self.assertEqual(header["convention"], "exp(+ikx), normalized measure")
        self.assertEqual(header["meta"], {"t": 0.25})
        np.testing.assert_array_equal(fields["xi"].coeffs, xi.coeffs)
        np.testing.assert_array_equal(fields["rho"].coeffs, rho.coeffs)

    def test_grid_csv_header(self):
        f = SpectralField.constant(2, 1, [1.0, 2.0])
        with tempfile.TemporaryDirectory() as tmp:
            path = write_grid_csv(Path(tmp) / "g.csv", f)
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], "x_1,x_2,c_1,c_2")
        self.assertEqual(len(lines), 1 + 6 * 6)
