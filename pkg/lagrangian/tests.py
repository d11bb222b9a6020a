import tempfile

import numpy as np
from django.test import SimpleTestCase

from core.utils import NumericalAbort
from multifluid.dynamics import vp_step
from multifluid.ensemble import Phase, PhaseEnsemble
from multifluid.testing import trig, uniform_ensemble, vector
from spectral.fourier import SpectralField

from .checkpoints import load_checkpoints, write_checkpoint
from .particles import (
    ParticleCloud,
    cell_masses,
    consistency_check,
    flow_vm_step,
    flow_vp_step,
    rejection_sample,
    relativistic_speed,
    sample_cloud,
)

TWO_PI = 2 * np.pi


def torus_gap(x, y):
    delta = np.abs(np.mod(x - y, TWO_PI))
    return np.max(np.minimum(delta, TWO_PI - delta))


def single_particle(x, xi):
    return ParticleCloud.from_samples(np.atleast_2d(x), np.atleast_2d(xi))


def rippled_phase(amplitude=0.3, cutoff=3):
    return PhaseEnsemble(
        phases=[
            Phase(
                weight=1.0,
                rho=trig(2, cutoff, ("cos", (1, 0), amplitude), const=1.0),
                xi=SpectralField.zeros(2, cutoff, 2),
            )
        ]
    )


class SamplingTestCase(SimpleTestCase):
    def test_monokinetic_uniform_phase(self):
        cloud = sample_cloud(uniform_ensemble(velocities=((0.4, -0.1),)), 500, seed=1)
        self.assertEqual(cloud.n, 500)
        np.testing.assert_allclose(cloud.xi0, np.tile([0.4, -0.1], (500, 1)), atol=1e-14)
        self.assertTrue(np.all((cloud.x0 >= 0) & (cloud.x0 < TWO_PI)))
        self.assertAlmostEqual(cloud.weights.sum(), 1.0)

    def test_phase_frequencies(self):
        n = 4000
        cloud = sample_cloud(uniform_ensemble(velocities=((0.5, 0.0), (-0.5, 0.0))), n, seed=3)
        frequency = np.mean(cloud.phase_index == 0)
        self.assertLess(abs(frequency - 0.5), 3 * np.sqrt(0.25 / n))

    def test_fixed_seed_is_deterministic(self):
        ens = rippled_phase()
        first, second = sample_cloud(ens, 300, seed=7), sample_cloud(ens, 300, seed=7)
        np.testing.assert_array_equal(first.x0, second.x0)
        np.testing.assert_array_equal(first.xi0, second.xi0)
        self.assertFalse(np.array_equal(first.x0, sample_cloud(ens, 300, seed=8).x0))

    def test_shared_initial_points(self):
        cloud = sample_cloud(rippled_phase(), 200, seed=2)
        np.testing.assert_array_equal(cloud.x_vp, cloud.x0)
        np.testing.assert_array_equal(cloud.x_vm, cloud.x0)
        np.testing.assert_array_equal(cloud.xi_vp, cloud.xi_vm)

    def test_density_is_followed(self):
        cloud = sample_cloud(rippled_phase(amplitude=0.5), 20000, seed=4)
        # E[cos x1] = amplitude / 2
        self.assertAlmostEqual(np.mean(np.cos(cloud.x0[:, 0])), 0.25, delta=0.02)

    def test_negative_density_aborts(self):
        density = SpectralField.constant(2, 2, [-1.0])
        with self.assertRaises(NumericalAbort):
            rejection_sample(density, 10, np.random.default_rng(0), batch_size=64)

    def test_vanishing_density_aborts(self):
        with self.assertRaises(NumericalAbort):
            rejection_sample(SpectralField.zeros(2, 2), 10, np.random.default_rng(0))

    def test_invalid_weights(self):
        with self.assertRaises(ValueError):
            ParticleCloud.from_samples(np.zeros((2, 2)), np.zeros((2, 2)), weights=[0.3, 0.3])


class PoissonFlowTestCase(SimpleTestCase):
    def test_free_streaming(self):
        cloud = sample_cloud(uniform_ensemble(velocities=((0.7, -0.3),)), 50, seed=0)
        zero = SpectralField.zeros(2, 3)
        for _ in range(10):
            cloud = flow_vp_step(cloud, zero, 0.1)
        expected = np.mod(cloud.x0 + 1.0 * cloud.xi0, TWO_PI)
        self.assertLess(torus_gap(cloud.x_vp, expected), 1e-12)
        np.testing.assert_array_equal(cloud.xi_vp, cloud.xi0)

    def test_pendulum_energy(self):
        phi = trig(1, 2, ("cos", (1,), 1.0))
        cloud = single_particle([np.pi / 2], [0.0])

        def energy(c):
            return 0.5 * c.xi_vp[0, 0] ** 2 + np.cos(c.x_vp[0, 0])

        start = energy(cloud)
        for _ in range(100):
            cloud = flow_vp_step(cloud, phi, 0.01)
        self.assertAlmostEqual(energy(cloud), start, delta=1e-9)
        self.assertGreater(cloud.xi_vp[0, 0], 0.0)

    def test_reversibility(self):
        phi = trig(2, 3, ("cos", (1, 0), 0.5), ("sin", (1, 1), 0.2))
        cloud = sample_cloud(rippled_phase(), 40, seed=5)
        cloud = cloud.replace(xi_vp=cloud.xi_vp + 0.3)
        start = cloud
        for _ in range(100):
            cloud = flow_vp_step(cloud, phi, 0.01)
        for _ in range(100):
            cloud = flow_vp_step(cloud, phi, -0.01)
        self.assertLess(torus_gap(cloud.x_vp, start.x_vp), 1e-7)
        np.testing.assert_allclose(cloud.xi_vp, start.xi_vp, atol=1e-7)

    def test_stage_potentials(self):
        phi = trig(2, 3, ("cos", (1, 0), 0.5))
        cloud = sample_cloud(rippled_phase(), 20, seed=5)
        frozen = flow_vp_step(cloud, phi, 0.05)
        staged = flow_vp_step(cloud, [phi] * 4, 0.05)
        np.testing.assert_array_equal(frozen.x_vp, staged.x_vp)
        with self.assertRaises(ValueError):
            flow_vp_step(cloud, [phi] * 3, 0.05)

    def test_zero_dt(self):
        cloud = single_particle([0.0], [0.0])
        with self.assertRaises(ValueError):
            flow_vp_step(cloud, None, 0.0)


class MaxwellFlowTestCase(SimpleTestCase):
    def test_free_relativistic_streaming(self):
        eps = 0.5
        cloud = single_particle([1.0, 2.0], [3.0, 4.0])
        zero = SpectralField.zeros(2, 2, 2)
        for _ in range(10):
            cloud = flow_vm_step(cloud, zero, SpectralField.zeros(2, 2), eps, 0.1)
        v = relativistic_speed(cloud.xi0, eps)
        self.assertLessEqual(np.linalg.norm(v), 1 / eps)
        self.assertLess(torus_gap(cloud.x_vm, np.mod(cloud.x0 + v, TWO_PI)), 1e-12)
        np.testing.assert_array_equal(cloud.xi_vm, cloud.xi0)

    def test_magnetic_gyration_keeps_speed(self):
        eps = 0.5
        cloud = single_particle([0.5, 0.5, 0.5], [1.0, 0.5, 0.2])
        B = SpectralField.constant(3, 2, [0.0, 0.0, 1.0])
        E = SpectralField.zeros(3, 2, 3)
        speed = np.linalg.norm(cloud.xi0)
        for _ in range(10):
            previous = np.linalg.norm(cloud.xi_vm)
            cloud = flow_vm_step(cloud, E, B, eps, 0.01)
            self.assertAlmostEqual(np.linalg.norm(cloud.xi_vm), previous, delta=1e-10)
        self.assertAlmostEqual(np.linalg.norm(cloud.xi_vm), speed, delta=1e-9)
        self.assertAlmostEqual(cloud.xi_vm[0, 2], 0.2, delta=1e-14)

    def test_no_magnetic_force_in_one_dimension(self):
        cloud = single_particle([0.5], [1.0])
        E = SpectralField.zeros(1, 2, 1)
        moved = flow_vm_step(cloud, E, None, 0.5, 0.1)
        self.assertEqual(moved.xi_vm[0, 0], 1.0)

    def test_small_eps_approaches_poisson_flow(self):
        phi = trig(2, 3, ("cos", (1, 0), 0.5))
        E = SpectralField.stack([trig(2, 3, ("sin", (1, 0), 0.5)), SpectralField.zeros(2, 3)])
        B = SpectralField.constant(2, 3, [1.0])
        start = sample_cloud(rippled_phase(), 30, seed=9)
        start = start.replace(xi_vp=start.xi_vp + 0.3, xi_vm=start.xi_vm + 0.3)
        vp = start
        for _ in range(50):
            vp = flow_vp_step(vp, phi, 0.02)
        gaps = []
        for eps in (0.1, 0.05):
            vm = start
            for _ in range(50):
                vm = flow_vm_step(vm, E, B, eps, 0.02)
            gaps.append(torus_gap(vm.x_vm, vp.x_vp) + np.max(np.abs(vm.xi_vm - vp.xi_vp)))
        self.assertLess(gaps[1], 0.7 * gaps[0])


class ConsistencyTestCase(SimpleTestCase):
    def test_initial_residual(self):
        ens = PhaseEnsemble(
            phases=[
                Phase(
                    weight=1.0,
                    rho=trig(2, 3, ("cos", (1, 0), 0.2), const=1.0),
                    xi=vector(2, 3, (0.1, [("sin", (0, 1), 0.2)]), (0.0, [])),
                )
            ]
        )
        report = consistency_check(sample_cloud(ens, 300, seed=1), ens)
        self.assertLess(report.max_residual, 1e-13)

    def test_fluid_and_particles_stay_together(self):
        ens = PhaseEnsemble(
            phases=[
                Phase(
                    weight=1.0,
                    rho=trig(2, 8, ("cos", (1, 0), 0.05), const=1.0),
                    xi=vector(2, 8, (0.0, [("sin", (1, 0), 0.1)]), (0.0, [])),
                )
            ]
        )
        cloud = sample_cloud(ens, 200, seed=6)
        for _ in range(20):
            stages = []
            next_ens = vp_step(ens, 0.01, stages=stages)
            cloud = flow_vp_step(cloud, stages, 0.01)
            ens = next_ens
        report = consistency_check(cloud, ens, system="vp")
        self.assertLess(report.max_residual, 1e-6)

    def test_density_score_shrinks_with_samples(self):
        ens = rippled_phase()
        small = consistency_check(sample_cloud(ens, 1000, seed=1), ens, n_bins=8)
        large = consistency_check(sample_cloud(ens, 16000, seed=1), ens, n_bins=8)
        self.assertLess(large.density_score, small.density_score / 2)

    def test_cell_masses(self):
        masses = cell_masses(trig(2, 3, ("cos", (1, 0), 0.3), const=1.0), 4)
        self.assertAlmostEqual(masses.sum(), 1.0)
        # the ripple moves mass between the x1-cells only
        np.testing.assert_allclose(masses.sum(axis=0), masses.sum(axis=0)[0])
        self.assertAlmostEqual(masses[0].sum(), 0.25 + 0.3 / (2 * np.pi))
        np.testing.assert_allclose(cell_masses(SpectralField.constant(1, 2, [1.0]), 5), 0.2)


class CheckpointTestCase(SimpleTestCase):
    def test_replay_order(self):
        cloud = sample_cloud(rippled_phase(), 64, seed=3)
        with tempfile.TemporaryDirectory() as tmp:
            write_checkpoint(tmp, cloud, 0)
            moved = flow_vp_step(cloud, trig(2, 3, ("cos", (1, 0), 0.5)), 0.1).replace(time=0.1)
            write_checkpoint(tmp, moved, 1)
            replay = load_checkpoints(tmp)
        self.assertEqual([c.time for c in replay], [0.0, 0.1])
        np.testing.assert_array_equal(replay[1].x_vp, moved.x_vp)
        np.testing.assert_array_equal(replay[1].phase_index, cloud.phase_index)
        self.assertEqual(replay[0].seed, 3)

    def test_missing_index(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(FileNotFoundError):
                load_checkpoints(tmp)
