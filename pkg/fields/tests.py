import numpy as np
from django.test import SimpleTestCase
from hypothesis import given
from hypothesis import settings as hypothesis_settings
from hypothesis import strategies as st
from rest_framework.exceptions import ValidationError
from scipy.integrate import quad

from spectral.calculus import (
    curl,
    divergence,
    divergence_residual,
    gradient,
    leray_project,
    mean,
    solve_poisson,
)
from spectral.fourier import SpectralException, SpectralField
from spectral.testing import random_density, random_divergence_free, random_field

from .electromagnetic import (
    EMState,
    assemble_B,
    assemble_E,
    em_diagnostics,
    field_energy,
    init_em_state,
    mean_momentum_ledger,
    wave_step,
)


def trig(dim, cutoff, *terms, const=0.0):
    return SpectralField.from_terms(dim, cutoff, [(const, list(terms))])


def transverse_mode(cutoff=4):
    """(0, cos x1) on the 2-torus."""
    return SpectralField.stack(
        [SpectralField.zeros(2, cutoff), trig(2, cutoff, ("cos", (1, 0), 1.0))]
    )


def bare_state(eps, A=None, W=None, cutoff=4):
    zero_vector = SpectralField.zeros(2, cutoff, 2)
    return EMState(
        eps=eps,
        phi=SpectralField.zeros(2, cutoff),
        A=zero_vector if A is None else A,
        eps_adot=zero_vector if W is None else W,
        mean_b0=np.zeros(1),
    )


class InitTestCase(SimpleTestCase):
    def setUp(self):
        self.rho0 = trig(2, 4, ("cos", (1, 0), 0.1), const=1.0)
        self.well_prepared = -gradient(solve_poisson(self.rho0))

    def test_well_prepared_data(self):
        state = init_em_state(
            self.rho0, np.zeros(2), self.well_prepared, SpectralField.zeros(2, 4), eps=0.2
        )
        self.assertLess(np.max(np.abs(state.eps_adot.coeffs)), 1e-15)
        self.assertEqual(np.max(np.abs(state.A.coeffs)), 0.0)

    def test_uniform_data_with_constant_field(self):
        state = init_em_state(
            SpectralField.constant(2, 4, [1.0]),
            np.zeros(2),
            SpectralField.zeros(2, 4, 2),
            SpectralField.constant(2, 4, [0.5]),
            eps=0.5,
        )
        self.assertEqual(np.max(np.abs(state.phi.coeffs)), 0.0)
        self.assertEqual(np.max(np.abs(state.A.coeffs)), 0.0)
        np.testing.assert_allclose(state.mean_b0, [0.5])

    def test_electric_field_is_reproduced(self):
        rng = np.random.default_rng(3)
        transverse = leray_project(random_field(rng, 2, 4, components=2))
        transverse = transverse.shifted(-mean(transverse))
        E0 = self.well_prepared + transverse
        B0 = random_divergence_free(rng, 2, 4) + 0.3
        state = init_em_state(self.rho0, np.zeros(2), E0, B0, eps=0.3)
        # εȦ(0) = -(E0 + ∇φ0), so E(0) = -∇φ0 - εȦ(0) = -∇φ0 + E0 + ∇φ0 = E0
        np.testing.assert_allclose(
            state.eps_adot.coeffs, -(E0 + gradient(state.phi)).coeffs, atol=1e-15
        )
        np.testing.assert_allclose(assemble_E(state).coeffs, E0.coeffs, atol=1e-14)
        np.testing.assert_allclose(curl(state.A).coeffs, (B0 - 0.3).coeffs, atol=1e-13)
        np.testing.assert_allclose(state.mean_b0, [0.3], atol=1e-15)

    def test_gauss_law_violation(self):
        with self.assertRaises(ValidationError) as ctx:
            init_em_state(
                self.rho0, np.zeros(2), SpectralField.zeros(2, 4, 2), None, eps=0.2
            )
        self.assertIn("gauss_law", ctx.exception.detail)

    def test_mean_current_violation(self):
        with self.assertRaises(ValidationError) as ctx:
            init_em_state(self.rho0, np.array([0.1, 0.0]), self.well_prepared, None, eps=0.2)
        self.assertIn("mean_current", ctx.exception.detail)

    def test_magnetic_divergence_violation(self):
        rho0 = SpectralField.constant(3, 2, [1.0])
        zero = SpectralField.zeros(3, 2)
        B0 = SpectralField.stack([trig(3, 2, ("cos", (1, 0, 0), 1.0)), zero, zero])
        with self.assertRaises(ValidationError) as ctx:
            init_em_state(rho0, np.zeros(3), SpectralField.zeros(3, 2, 3), B0, eps=0.2)
        self.assertIn("magnetic_divergence", ctx.exception.detail)

    def test_relaxed_mean_electric_field(self):
        rho0 = SpectralField.constant(2, 3, [1.0])
        E0 = SpectralField.constant(2, 3, [0.01, 0.0])
        with self.assertRaises(ValidationError) as ctx:
            init_em_state(rho0, np.zeros(2), E0, None, eps=0.2)
        self.assertIn("mean_electric_field", ctx.exception.detail)
        state = init_em_state(rho0, np.zeros(2), E0, None, eps=0.2, mean_e_bound=0.02)
        np.testing.assert_allclose(state.mean_eps_adot, [-0.01, 0.0])

    def test_zero_eps_embedding(self):
        transverse = transverse_mode()
        state = init_em_state(
            SpectralField.constant(2, 4, [1.0]), np.zeros(2), transverse, None, eps=0.0
        )
        self.assertEqual(np.max(np.abs(state.eps_adot.coeffs)), 0.0)
        state = wave_step(state, transverse, 0.1)
        self.assertEqual(np.max(np.abs(state.A.coeffs)), 0.0)


class WaveStepTestCase(SimpleTestCase):
    def run_steps(self, state, dt, t_final, source=None, slope=None):
        source = SpectralField.zeros(2, state.cutoff, 2) if source is None else source
        for _ in range(int(round(t_final / dt))):
            state = wave_step(state, source, dt, slope)
        return state

    def test_position_data_rotates(self):
        A0 = transverse_mode()
        for eps in (0.4, 0.05):
            for dt in (1e-2, 1e-3):
                state = self.run_steps(bare_state(eps, A=A0), dt, 0.1)
                expected = A0 * np.cos(state.time / eps)
                np.testing.assert_allclose(state.A.coeffs, expected.coeffs, atol=1e-10)

    def test_velocity_data_rotates(self):
        W0 = transverse_mode()
        for eps in (0.4, 0.05):
            for dt in (1e-2, 1e-3):
                state = self.run_steps(bare_state(eps, W=W0), dt, 0.1)
                expected = W0 * np.sin(state.time / eps)
                np.testing.assert_allclose(state.A.coeffs, expected.coeffs, atol=1e-10)

    @hypothesis_settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_zero_source_preserves_mode_energy(self, seed):
        rng = np.random.default_rng(seed)
        # rotated gradient of a stream function is divergence-free in 2-d
        psi = random_field(rng, 2, 4)
        A0 = SpectralField.stack([gradient(psi).component(1), -gradient(psi).component(0)])
        state0 = bare_state(0.1, A=A0, W=A0 * 0.5)
        state = self.run_steps(state0, 0.01, 0.3)
        k_sq = np.where(A0.plan.k_sq > 0, A0.plan.k_sq, 1.0)

        def mode_energy(s):
            return np.abs(s.A.coeffs) ** 2 + np.abs(s.eps_adot.coeffs) ** 2 / k_sq

        np.testing.assert_allclose(mode_energy(state), mode_energy(state0), atol=1e-12)
        self.assertLess(divergence_residual(state.A), 1e-12)

    def test_constant_source_matches_duhamel_integral(self):
        eps, t_final = 0.05, 0.5
        source = transverse_mode() * 0.7
        for dt in (1e-2, 5e-3):
            state = self.run_steps(bare_state(eps), dt, t_final, source=source)
            integral, _ = quad(
                lambda s: np.sin((t_final - s) / eps) * 0.7, 0.0, t_final, limit=200
            )
            # mode k = e1 of the second component carries half the amplitude
            self.assertAlmostEqual(state.A.coeffs[1, 5, 4].real, 0.5 * integral, places=10)

    def test_linear_source_is_exact(self):
        eps, t_final = 0.2, 0.4
        j0, j1 = transverse_mode() * 0.3, transverse_mode() * 1.5
        coarse = bare_state(eps)
        steps = 4
        dt = t_final / steps
        for n in range(steps):
            coarse = wave_step(coarse, j0 + j1 * (n * dt), dt, j1)
        fine = bare_state(eps)
        for n in range(400):
            fine = wave_step(fine, j0 + j1 * (n * t_final / 400), t_final / 400, j1)
        np.testing.assert_allclose(coarse.A.coeffs, fine.A.coeffs, atol=1e-12)

    def test_quadratic_source_is_exact(self):
        eps, t_final = 0.2, 0.4
        j0, j1, j2 = transverse_mode() * 0.3, transverse_mode() * 1.5, transverse_mode() * -2.0
        mean_j2 = SpectralField.constant(2, 4, [0.5, 0.0])

        def source(s):
            return j0 + j1 * s + (j2 + mean_j2) * s**2

        def slope(s):
            return j1 + (j2 + mean_j2) * (2 * s)

        single = wave_step(bare_state(eps), j0, t_final, j1, j2 + mean_j2)
        fine = bare_state(eps)
        dt = t_final / 400
        for n in range(400):
            s = n * dt
            fine = wave_step(fine, source(s), dt, slope(s), j2 + mean_j2)
        np.testing.assert_allclose(single.A.coeffs, fine.A.coeffs, atol=1e-12)
        np.testing.assert_allclose(single.eps_adot.coeffs, fine.eps_adot.coeffs, atol=1e-12)
        np.testing.assert_allclose(single.mean_eps_adot, [0.5 * t_final**3 / 3, 0.0], atol=1e-15)

    def test_gradient_source_is_filtered(self):
        psi = trig(2, 4, ("cos", (1, 1), 1.0))
        state = wave_step(bare_state(0.3), gradient(psi), 0.05)
        self.assertLess(np.max(np.abs(state.A.coeffs)), 1e-15)

    def test_mean_current_feeds_ledger(self):
        current = SpectralField.constant(2, 4, [0.3, -0.1])
        state = self.run_steps(bare_state(0.2), 0.01, 0.5, source=current)
        np.testing.assert_allclose(state.mean_eps_adot, [0.15, -0.05], atol=1e-13)
        self.assertLess(mean_momentum_ledger(state, [0.15, -0.05]), 1e-13)
        self.assertEqual(np.max(np.abs(mean(state.A))), 0.0)

    def test_ledger_zero(self):
        self.assertEqual(mean_momentum_ledger(bare_state(0.2), np.zeros(2)), 0.0)

    def test_non_positive_dt(self):
        with self.assertRaises(ValueError):
            wave_step(bare_state(0.2), SpectralField.zeros(2, 4, 2), 0.0)


class AssemblyTestCase(SimpleTestCase):
    def test_magnetic_field_of_zero_potential(self):
        state = bare_state(0.2).replace(mean_b0=np.array([0.4]))
        B = assemble_B(state)
        np.testing.assert_allclose(mean(B), [0.4])
        self.assertEqual(np.max(np.abs(B.coeffs)), 0.4)

    def test_no_magnetic_field_in_one_dimension(self):
        state = EMState(
            eps=0.2,
            phi=SpectralField.zeros(1, 2),
            A=SpectralField.zeros(1, 2, 1),
            eps_adot=SpectralField.zeros(1, 2, 1),
            mean_b0=np.zeros(0),
        )
        with self.assertRaises(SpectralException.DimensionMismatch):
            assemble_B(state)
        self.assertEqual(field_energy(state), 0.0)

    def test_electric_field_without_potential_part(self):
        W = transverse_mode()
        np.testing.assert_allclose(assemble_E(bare_state(0.2, W=W)).coeffs, (-W).coeffs)

    def test_gauss_law_holds(self):
        rho = random_density(np.random.default_rng(1), 2, 5)
        state = bare_state(0.2, W=transverse_mode(5), cutoff=5).replace(phi=solve_poisson(rho))
        np.testing.assert_allclose(
            divergence(assemble_E(state)).coeffs, (rho - 1.0).coeffs, atol=1e-14
        )

    def test_divergence_free_magnetic_field(self):
        rng = np.random.default_rng(2)
        zero = SpectralField.zeros(3, 3, 3)
        A = SpectralField(curl(random_field(rng, 3, 3, components=3)).coeffs)
        state = EMState(
            eps=0.2, phi=SpectralField.zeros(3, 3), A=A, eps_adot=zero, mean_b0=np.ones(3)
        )
        self.assertLess(divergence_residual(assemble_B(state)), 1e-12)

    def test_field_energy(self):
        self.assertEqual(field_energy(bare_state(0.2)), 0.0)
        state = bare_state(0.2, W=-transverse_mode())
        self.assertAlmostEqual(field_energy(state), 0.25)

    def test_diagnostics_row(self):
        row = em_diagnostics(bare_state(0.2), np.zeros(2))
        self.assertEqual(
            set(row),
            {"t", "field_energy", "gauge_div_a", "gauge_mean_a", "ledger_residual", "mean_b_1"},
        )
