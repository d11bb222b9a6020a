import numpy as np
from django.test import SimpleTestCase
from hypothesis import given
from hypothesis import settings as hypothesis_settings
from hypothesis import strategies as st
from rest_framework.exceptions import ValidationError

from core.utils import NumericalAbort
from fields.electromagnetic import assemble_E, init_em_state, mean_momentum_ledger
from spectral.calculus import gradient, mean, solve_poisson
from spectral.fourier import SpectralException, SpectralField
from spectral.norms import AnalyticNormParams, analytic_norm
from spectral.testing import random_field

from .cauchy_kovalevskaya import CKIterationReport, ck_iterate
from .dynamics import MeanCurrentLedger, vm_rhs, vm_step, vp_rhs, vp_step
from .ensemble import (
    Phase,
    PhaseEnsemble,
    current_density,
    gate_value,
    kinetic_energy,
    measure_eval,
    moments,
    relativistic_velocity,
    total_density,
    total_energy,
)
from .testing import (
    crossed_streams,
    mode_amplitude,
    plasma_wave,
    trig,
    uniform_ensemble,
    vector,
    well_prepared_fields,
)


def max_gap(a: PhaseEnsemble, b: PhaseEnsemble) -> float:
    return max(
        max(np.max(np.abs(p.rho.coeffs - q.rho.coeffs)), np.max(np.abs(p.xi.coeffs - q.xi.coeffs)))
        for p, q in zip(a.phases, b.phases)
    )


class EnsembleTestCase(SimpleTestCase):
    def test_validate_accepts_normalized_ensemble(self):
        ens, _ = crossed_streams()
        ens.validate()

    def test_weights_must_sum_to_one(self):
        ens = uniform_ensemble(velocities=((0.0, 0.0), (0.1, 0.0)))
        broken = PhaseEnsemble(
            phases=[Phase(weight=0.3, rho=p.rho, xi=p.xi) for p in ens.phases]
        )
        with self.assertRaises(ValidationError) as ctx:
            broken.validate()
        self.assertIn("weights", ctx.exception.detail)

    def test_total_mass_must_be_one(self):
        phase = Phase(
            weight=1.0,
            rho=SpectralField.constant(2, 3, [1.2]),
            xi=SpectralField.zeros(2, 3, 2),
        )
        with self.assertRaises(ValidationError) as ctx:
            PhaseEnsemble(phases=[phase]).validate()
        self.assertIn("neutrality", ctx.exception.detail)

    def test_density_must_be_positive(self):
        phase = Phase(
            weight=1.0,
            rho=trig(2, 3, ("cos", (1, 0), 1.5), const=1.0),
            xi=SpectralField.zeros(2, 3, 2),
        )
        with self.assertRaises(ValidationError) as ctx:
            PhaseEnsemble(phases=[phase]).validate()
        self.assertIn("positivity", ctx.exception.detail)

    def test_velocity_must_be_a_vector(self):
        with self.assertRaises(SpectralException.DimensionMismatch):
            PhaseEnsemble(
                phases=[
                    Phase(
                        weight=1.0,
                        rho=SpectralField.constant(2, 3, [1.0]),
                        xi=SpectralField.zeros(2, 3, 1),
                    )
                ]
            )


class RelativisticVelocityTestCase(SimpleTestCase):
    def test_zero_eps_is_identity(self):
        xi = random_field(np.random.default_rng(0), 2, 3, components=2)
        self.assertIs(relativistic_velocity(xi, 0.0), xi)

    def test_constant_velocity(self):
        xi = SpectralField.constant(2, 3, [1.0, 0.0])
        v = relativistic_velocity(xi, 0.7)
        np.testing.assert_allclose(mean(v), [1 / np.sqrt(1.49), 0.0], atol=1e-14)
        np.testing.assert_allclose(v.coeffs[0][np.abs(v.plan.k_norm) > 0], 0.0, atol=1e-14)

    def test_gate_violation_aborts(self):
        xi = SpectralField.constant(2, 3, [1.0, 0.0])
        with self.assertRaises(NumericalAbort):
            relativistic_velocity(xi, 1.0)

    def test_velocity_correction_bound(self):
        eps = 0.3
        xi = vector(2, 4, (1.0, [("cos", (1, 0), 0.2)]), (0.0, [("sin", (0, 1), 0.3)]))
        xi_grid = xi.to_grid()
        v_grid = relativistic_velocity(xi, eps).to_grid()
        speed_sq = np.sum(xi_grid**2, axis=0)
        bound = eps * speed_sq / np.sqrt(1 + eps**2 * speed_sq)
        gap = np.sqrt(np.sum((v_grid - xi_grid) ** 2, axis=0))
        self.assertTrue(np.all(gap <= bound))
        self.assertTrue(np.all(np.sqrt(np.sum(v_grid**2, axis=0)) <= 1 / eps))

    def test_norm_of_velocity_under_gate(self):
        eps = 0.3
        xi = vector(2, 4, (1.0, [("cos", (1, 0), 0.2)]), (0.0, [("sin", (0, 1), 0.3)]))
        v = relativistic_velocity(xi, eps)
        self.assertLessEqual(analytic_norm(v, 1.2), np.sqrt(2) * analytic_norm(xi, 1.2))


class RightHandSideTestCase(SimpleTestCase):
    def test_static_phase(self):
        rng = np.random.default_rng(4)
        phase = Phase(
            weight=1.0,
            rho=SpectralField.constant(2, 3, [1.0]) + random_field(rng, 2, 3, scale=0.05),
            xi=SpectralField.zeros(2, 3, 2),
        )
        ens = PhaseEnsemble(phases=[phase], eps=0.3)
        B = random_field(rng, 2, 3)
        [(drho, dxi)] = vm_rhs(ens, SpectralField.zeros(2, 3, 2), B)
        self.assertEqual(np.max(np.abs(drho.coeffs)), 0.0)
        self.assertEqual(np.max(np.abs(dxi.coeffs)), 0.0)

    def test_free_uniform_stream(self):
        ens = uniform_ensemble(velocities=((0.3, -0.2),))
        [(drho, dxi)] = vm_rhs(ens, SpectralField.zeros(2, 3, 2))
        self.assertLess(np.max(np.abs(drho.coeffs)), 1e-14)
        self.assertLess(np.max(np.abs(dxi.coeffs)), 1e-14)

    def test_zero_eps_matches_poisson_variant(self):
        ens, _ = crossed_streams(eps=0.0)
        phi = solve_poisson(total_density(ens))
        for (r1, x1), (r2, x2) in zip(vm_rhs(ens, -gradient(phi)), vp_rhs(ens)):
            np.testing.assert_array_equal(r1.coeffs, r2.coeffs)
            np.testing.assert_array_equal(x1.coeffs, x2.coeffs)

    def test_magnetic_force_needs_positive_eps(self):
        ens, _ = crossed_streams(eps=0.0)
        E = SpectralField.zeros(2, 3, 2)
        B = SpectralField.constant(2, 3, [1.0])
        with_b = vm_rhs(ens, E, B)
        without_b = vm_rhs(ens, E)
        for (_, x1), (_, x2) in zip(with_b, without_b):
            np.testing.assert_array_equal(x1.coeffs, x2.coeffs)


class SteppingTestCase(SimpleTestCase):
    def test_vm_fixed_point(self):
        ens = uniform_ensemble(velocities=((0.0, 0.0), (0.0, 0.0)), eps=0.2)
        em = init_em_state(
            total_density(ens),
            np.zeros(2),
            SpectralField.zeros(2, 3, 2),
            SpectralField.constant(2, 3, [0.3]),
            eps=0.2,
        )
        new_ens, new_em = vm_step(ens, em, 0.01)
        self.assertLess(max_gap(new_ens, ens), 1e-12)
        self.assertLess(np.max(np.abs(new_em.A.coeffs)), 1e-12)
        np.testing.assert_allclose(new_em.mean_b0, [0.3])

    def test_vp_fixed_point(self):
        ens = uniform_ensemble(velocities=((0.5, 0.0), (-0.5, 0.0)))
        self.assertLess(max_gap(vp_step(ens, 0.05), ens), 1e-12)

    def test_plasma_oscillation(self):
        a = 1e-3
        ens = plasma_wave(amplitude=a)
        n_steps = 126
        dt = 2 * np.pi / n_steps
        half = None
        for n in range(n_steps):
            ens = vp_step(ens, dt)
            if n + 1 == n_steps // 2:
                half = mode_amplitude(ens.phases[0].rho, (1,))
        self.assertAlmostEqual(half / (a / 2), -1.0, delta=0.01)
        self.assertAlmostEqual(mode_amplitude(ens.phases[0].rho, (1,)) / (a / 2), 1.0, delta=0.01)

    def test_mass_is_conserved_per_phase(self):
        ens, em = crossed_streams(eps=0.2)
        masses = [mean(p.rho)[0] for p in ens.phases]
        for _ in range(10):
            ens, em = vm_step(ens, em, 0.01)
        for phase, mass in zip(ens.phases, masses):
            self.assertAlmostEqual(mean(phase.rho)[0], mass, delta=1e-12)

    def test_zero_eps_reduces_to_poisson(self):
        vm_ens, em = crossed_streams(eps=0.0)
        vp_ens = vm_ens
        for _ in range(10):
            vm_ens, em = vm_step(vm_ens, em, 0.02)
            vp_ens = vp_step(vp_ens, 0.02)
        self.assertLess(max_gap(vm_ens, vp_ens), 1e-10)

    def test_small_eps_approaches_poisson(self):
        for eps in (0.1, 0.05, 0.025):
            ens, em = crossed_streams(eps=eps)
            vm_ens, _ = vm_step(ens, em, 0.01)
            vp_ens = vp_step(ens.with_eps(0.0), 0.01)
            self.assertLess(max_gap(vm_ens, vp_ens), eps**2)

    def test_mean_current_of_poisson_flow(self):
        rng = np.random.default_rng(11)
        phases = []
        for weight in (0.4, 0.6):
            rho = random_field(rng, 1, 3, scale=0.02)
            phases.append(
                Phase(
                    weight=weight,
                    rho=rho.shifted(1.0 - mean(rho)),
                    xi=random_field(rng, 1, 3, scale=0.05),
                )
            )
        ens = PhaseEnsemble(phases=phases)
        initial = mean(current_density(ens))
        for _ in range(100):
            ens = vp_step(ens, 0.01)
        np.testing.assert_allclose(mean(current_density(ens)), initial, atol=1e-8)

    def test_ledger_tracks_mean_momentum(self):
        # uniform cold phase in a mean field e: ξ(t) = e sin t, so ⟨j⟩(t) = (e sin t, 0)
        e, dt, n_steps = 0.01, 0.01, 100
        ens = uniform_ensemble(eps=0.0)
        em = init_em_state(
            total_density(ens),
            np.zeros(2),
            SpectralField.constant(2, 3, [e, 0.0]),
            None,
            eps=0.0,
            mean_e_bound=0.02,
        )
        ledger = MeanCurrentLedger(2)
        start = em.mean_eps_adot
        for _ in range(n_steps):
            ens, em = vm_step(ens, em, dt, ledger=ledger)
        t = n_steps * dt
        np.testing.assert_allclose(ledger.times[-1], t)
        np.testing.assert_allclose(ledger.integrated, [e * (1 - np.cos(t)), 0.0], atol=1e-11)
        np.testing.assert_allclose(em.mean_eps_adot, [-e * np.cos(t), 0.0], atol=1e-11)
        self.assertLess(mean_momentum_ledger(em, ledger.integrated, initial_mean=start), 1e-11)

    def test_ledger_flags_a_mean_momentum_drift(self):
        ens, em = crossed_streams(eps=0.2)
        ledger = MeanCurrentLedger(2)
        start = em.mean_eps_adot
        for _ in range(5):
            ens, em = vm_step(ens, em, 0.01, ledger=ledger)
        self.assertEqual(len(ledger), 6)
        self.assertLess(mean_momentum_ledger(em, ledger.integrated, initial_mean=start), 1e-10)
        drifted = em.replace(eps_adot=em.eps_adot.shifted([1e-6, 0.0]))
        self.assertAlmostEqual(
            mean_momentum_ledger(drifted, ledger.integrated, initial_mean=start), 1e-6, delta=1e-9
        )

    def test_gauge_after_step(self):
        ens, em = crossed_streams(eps=0.2)
        for _ in range(3):
            ens, em = vm_step(ens, em, 0.01)
        self.assertLess(np.max(np.abs(mean(em.A))), 1e-15)
        k = em.A.plan.k
        self.assertLess(np.max(np.abs(sum(k[a] * em.A.coeffs[a] for a in range(2)))), 1e-12)

    def test_stage_fields_are_collected(self):
        ens, em = crossed_streams(eps=0.2)
        stages = []
        vm_step(ens, em, 0.01, stages=stages)
        self.assertEqual(len(stages), 4)
        np.testing.assert_allclose(stages[0][0].coeffs, assemble_E(em).coeffs)
        phis = []
        vp_step(ens.with_eps(0.0), 0.01, stages=phis)
        self.assertEqual(len(phis), 4)

    def observed_order(self, solve, dt):
        """log2 of the successive-difference ratio over dt, dt/2, dt/4."""
        coarse, mid, fine = solve(dt), solve(dt / 2), solve(dt / 4)
        return np.log2(max_gap(coarse, mid) / max_gap(mid, fine))

    def test_vp_observed_order(self):
        ens, _ = crossed_streams(eps=0.0, amplitude=0.3, drift=0.3)

        def solve(dt):
            state = ens
            for _ in range(int(round(0.8 / dt))):
                state = vp_step(state, dt)
            return state

        self.assertGreaterEqual(self.observed_order(solve, 0.08), 3.5)

    def test_vm_observed_order(self):
        ens, em0 = crossed_streams(eps=0.4, amplitude=0.3, drift=0.3)

        def solve(dt):
            state, em = ens, em0
            for _ in range(int(round(0.4 / dt))):
                state, em = vm_step(state, em, dt)
            return state

        self.assertGreaterEqual(self.observed_order(solve, 0.04), 3.5)

    def test_gate_violation_aborts_step(self):
        ens = uniform_ensemble(velocities=((2.0, 0.0),), eps=0.5)
        em = well_prepared_fields(ens.with_eps(0.0))
        with self.assertRaises(NumericalAbort):
            vm_step(ens, em, 0.01)

    def test_non_positive_dt(self):
        ens, em = crossed_streams()
        with self.assertRaises(ValueError):
            vm_step(ens, em, 0.0)
        with self.assertRaises(ValueError):
            vp_step(ens, -0.1)


class MomentsTestCase(SimpleTestCase):
    def test_static_uniform_phase(self):
        m = moments(uniform_ensemble())
        self.assertEqual(np.max(np.abs(m.j_total.coeffs)), 0.0)
        self.assertEqual(m.m_alpha_sup, 0.0)
        np.testing.assert_allclose(m.rho_total.to_grid(), 1.0)

    def test_counter_streams(self):
        m = moments(uniform_ensemble(velocities=((0.3, 0.4), (-0.3, -0.4))), alpha=1.0)
        self.assertLess(np.max(np.abs(m.j_total.coeffs)), 1e-15)
        np.testing.assert_allclose(m.m_alpha, 0.5)
        self.assertAlmostEqual(m.fourth_moment_l1, 0.0625)

    def test_measure_of_one_is_density(self):
        ens, _ = crossed_streams(eps=0.0)
        rho = measure_eval(ens, lambda xi: np.ones(xi.shape[1:]))
        np.testing.assert_allclose(rho.coeffs, total_density(ens).coeffs, atol=1e-14)

    def test_measure_of_velocity_is_current(self):
        ens, _ = crossed_streams(eps=0.0)
        j0 = measure_eval(ens, lambda xi: xi[0])
        np.testing.assert_allclose(j0.coeffs, current_density(ens).component(0).coeffs, atol=1e-14)

    def test_measure_of_speed_squared(self):
        ens = uniform_ensemble(velocities=((1.0, 0.0), (0.0, 2.0)))
        energy = measure_eval(ens, lambda xi: np.sum(xi**2, axis=0))
        self.assertAlmostEqual(mean(energy)[0], 0.5 * 1.0 + 0.5 * 4.0)

    def test_gate_value(self):
        ens = uniform_ensemble(velocities=((0.5, 0.0),), eps=0.4)
        self.assertAlmostEqual(gate_value(ens), 0.2)


class EnergyTestCase(SimpleTestCase):
    def test_zero_state(self):
        self.assertEqual(total_energy(uniform_ensemble()), 0.0)

    def test_nonrelativistic_limit_of_kinetic_energy(self):
        ens, _ = crossed_streams(eps=1e-4)
        classical = 0.5 * sum(
            p.weight * np.mean(np.sum(p.xi.to_grid() ** 2, axis=0) * p.rho.to_grid()[0])
            for p in ens.phases
        )
        self.assertAlmostEqual(kinetic_energy(ens), classical, delta=1e-9)

    def test_energy_with_fields(self):
        ens, em = crossed_streams(eps=0.2)
        self.assertGreater(total_energy(ens, em), kinetic_energy(ens))
        self.assertAlmostEqual(total_energy(ens, em), total_energy(ens), delta=1e-12)


class CauchyKovalevskayaTestCase(SimpleTestCase):
    def test_fixed_point(self):
        ens = uniform_ensemble(velocities=((0.0, 0.0),), eps=0.2)
        em = well_prepared_fields(ens)
        params = AnalyticNormParams(delta=1.2, delta0=1.5, eta=0.2, beta=0.5)
        report = ck_iterate(ens, em, params, n_max=5)
        self.assertEqual(report.diffs_rho[0], 0.0)
        self.assertEqual(report.diffs_xi[0], 0.0)
        self.assertFalse(report.diverged)

    def test_contraction(self):
        ens, em = crossed_streams(eps=0.2)
        params = AnalyticNormParams(delta=1.2, delta0=1.5, eta=1.0, beta=0.5)
        report = ck_iterate(ens, em, params, n_max=8)
        self.assertIsInstance(report, CKIterationReport)
        self.assertEqual(report.n_iters, 8)
        self.assertTrue(report.contracts(first=3, last=8))
        self.assertFalse(report.diverged)
        self.assertTrue(all(np.isfinite(report.diffs_rho)))
        constants = report.constants
        self.assertAlmostEqual(constants["c1"], 4 * constants["c0"])
        self.assertAlmostEqual(constants["c2"], 8 * constants["c1"])
        self.assertAlmostEqual(constants["eps0"], 1 / (np.sqrt(2) * constants["c1"]))
        self.assertTrue(all(b["rho_within_c1"] for b in report.induction_bounds))

    def test_limit_matches_time_stepping(self):
        ens, em = crossed_streams(eps=0.2)
        params = AnalyticNormParams(delta=1.2, delta0=1.5, eta=0.2, beta=0.5)
        report = ck_iterate(ens, em, params, n_max=6, n_nodes=16)
        dt = report.times[-1] / 16
        stepped = ens
        for _ in range(16):
            stepped, em = vm_step(stepped, em, dt)
        self.assertLess(max_gap(report.final, stepped), 1e-6)

    def test_report_payload(self):
        ens, em = crossed_streams(eps=0.2)
        params = AnalyticNormParams(delta=1.2, delta0=1.5, eta=0.2, beta=0.5)
        payload = ck_iterate(ens, em, params, n_max=3).to_dict()
        self.assertAlmostEqual(payload["horizon"], 0.2 * 0.3)
        self.assertEqual(len(payload["ratios"]), 2)

    def test_invalid_arguments(self):
        ens, em = crossed_streams(eps=0.2)
        params = AnalyticNormParams(delta=1.2, delta0=1.5, eta=0.2, beta=0.5)
        with self.assertRaises(ValueError):
            ck_iterate(ens, em, params, n_max=0)
        with self.assertRaises(ValueError):
            ck_iterate(ens, em, params, n_max=2, n_nodes=2)


class PropertyTestCase(SimpleTestCase):
    @hypothesis_settings(max_examples=20, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_neutrality_is_preserved(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_field(rng, 2, 3, scale=0.02)
        rho = rho.shifted(1.0 - mean(rho))
        phase = Phase(weight=1.0, rho=rho, xi=random_field(rng, 2, 3, components=2, scale=0.05))
        ens = vp_step(PhaseEnsemble(phases=[phase]), 0.02)
        self.assertAlmostEqual(mean(total_density(ens))[0], 1.0, delta=1e-13)
