import itertools

import numpy as np
from django.test import SimpleTestCase, override_settings
from hypothesis import given
from hypothesis import settings as hypothesis_settings
from hypothesis import strategies as st

from lagrangian.particles import ParticleCloud, sample_cloud
from multifluid.testing import trig, uniform_ensemble
from spectral.fourier import SpectralField
from spectral.testing import random_density

from .coupling import coupling_bound_check, coupling_Q, loeper_check, subsampled_w2_sq
from .wasserstein import (
    EmpiricalMeasure,
    TransportException,
    circular_w2_sq,
    cost_matrix,
    pairing_cost,
    w2_exact,
    w2_sliced,
)

TWO_PI = 2 * np.pi
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_measure(rng, n, dim=2, spread=1.0):
    return EmpiricalMeasure(
        rng.uniform(0.0, TWO_PI, size=(n, dim)), rng.normal(scale=spread, size=(n, dim))
    )


def brute_force_w2(mu, nu):
    cost = cost_matrix(mu, nu)
    best = min(
        cost[np.arange(mu.n), list(perm)].mean() for perm in itertools.permutations(range(nu.n))
    )
    return np.sqrt(best)


class ExactTransportTestCase(SimpleTestCase):
    def test_identical_clouds(self):
        mu = random_measure(np.random.default_rng(0), 32)
        self.assertEqual(w2_exact(mu, mu), 0.0)

    def test_dirac_pair(self):
        mu = EmpiricalMeasure([[0.0, 0.0]])
        self.assertAlmostEqual(w2_exact(mu, EmpiricalMeasure([[1.3, 0.0]])), 1.3, places=14)
        # the geodesic goes through 0
        wrapped = EmpiricalMeasure([[0.1, 0.0]]), EmpiricalMeasure([[TWO_PI - 0.1, 0.0]])
        self.assertAlmostEqual(w2_exact(*wrapped), 0.2, places=12)

    @given(seed=seeds)
    @hypothesis_settings(max_examples=40, deadline=None)
    def test_matches_permutation_minimum(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        mu, nu = random_measure(rng, n), random_measure(rng, n)
        self.assertAlmostEqual(w2_exact(mu, nu), brute_force_w2(mu, nu), delta=1e-12)

    @given(seed=seeds)
    @hypothesis_settings(max_examples=30, deadline=None)
    def test_metric_axioms(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (random_measure(rng, 24) for _ in range(3))
        self.assertAlmostEqual(w2_exact(a, b), w2_exact(b, a), delta=1e-12)
        self.assertLessEqual(w2_exact(a, c), w2_exact(a, b) + w2_exact(b, c) + 1e-10)

    def test_common_translation_leaves_distance(self):
        rng = np.random.default_rng(4)
        mu, nu = random_measure(rng, 40), random_measure(rng, 40)
        shift = np.array([2.5, -1.1])
        moved = w2_exact(mu.translated(position_shift=shift), nu.translated(position_shift=shift))
        self.assertAlmostEqual(moved, w2_exact(mu, nu), delta=1e-12)

    def test_any_pairing_costs_at_least_w2(self):
        rng = np.random.default_rng(5)
        mu, nu = random_measure(rng, 50), random_measure(rng, 50)
        self.assertGreaterEqual(pairing_cost(mu, nu), w2_exact(mu, nu) ** 2 - 1e-12)

    def test_weighted_measures_use_network_simplex(self):
        mu = EmpiricalMeasure([[1.0, 0.0], [0.0, 2.0]], weights=[0.25, 0.75])
        nu = EmpiricalMeasure([[0.0, 0.0]])
        self.assertAlmostEqual(w2_exact(mu, nu), np.sqrt(0.25 + 3.0), places=12)

    @override_settings(SIM_EXACT_OT_LIMIT=4, SIM_LP_OT_LIMIT=4)
    def test_size_limits(self):
        rng = np.random.default_rng(6)
        with self.assertRaises(TransportException.UnsupportedMeasures):
            w2_exact(random_measure(rng, 5), random_measure(rng, 5))
        with self.assertRaises(TransportException.UnsupportedMeasures):
            w2_exact(random_measure(rng, 5), random_measure(rng, 3))

    def test_incompatible_spaces(self):
        with self.assertRaises(TransportException.UnsupportedMeasures):
            w2_exact(EmpiricalMeasure([[0.0, 0.0]]), EmpiricalMeasure([[0.0, 0.0]], [[1.0, 1.0]]))

    def test_invalid_weights(self):
        with self.assertRaises(TransportException.UnsupportedMeasures):
            EmpiricalMeasure([[0.0], [1.0]], weights=[0.5, 0.6])


class SlicedTransportTestCase(SimpleTestCase):
    def test_identical_clouds(self):
        mu = random_measure(np.random.default_rng(0), 64)
        self.assertAlmostEqual(w2_sliced(mu, mu, n_proj=8), 0.0, places=12)

    def test_velocity_translation_recovered(self):
        mu = random_measure(np.random.default_rng(1), 200)
        shift = np.array([0.3, -0.4])
        estimate = w2_sliced(mu, mu.translated(velocity_shift=shift), n_proj=256, seed=3)
        self.assertAlmostEqual(estimate, 0.5, delta=0.01)

    def test_circle_rule(self):
        a = np.array([0.1, 1.0, 3.0])
        self.assertAlmostEqual(circular_w2_sq(a, a + 0.2), 0.04, places=14)
        self.assertAlmostEqual(circular_w2_sq([0.05], [TWO_PI - 0.05]), 0.01, places=12)

    @given(seed=seeds)
    @hypothesis_settings(max_examples=20, deadline=None)
    def test_never_above_exact(self, seed):
        rng = np.random.default_rng(seed)
        mu, nu = random_measure(rng, 48), random_measure(rng, 48)
        self.assertLessEqual(w2_sliced(mu, nu, n_proj=16, seed=seed), w2_exact(mu, nu) + 1e-12)

    def test_tracks_exact_distance(self):
        rng = np.random.default_rng(8)
        exact, sliced = [], []
        for trial in range(12):
            mu = random_measure(rng, 128)
            shift = rng.normal(size=2) * rng.uniform(0.1, 1.0)
            nu = EmpiricalMeasure(
                mu.positions + rng.normal(scale=0.01, size=mu.positions.shape),
                mu.velocities + shift,
            )
            exact.append(w2_exact(mu, nu))
            sliced.append(w2_sliced(mu, nu, n_proj=32, seed=trial))
        self.assertGreaterEqual(np.corrcoef(exact, sliced)[0, 1], 0.99)

    def test_seed_determinism(self):
        rng = np.random.default_rng(9)
        mu, nu = random_measure(rng, 32, dim=3), random_measure(rng, 32, dim=3)
        self.assertEqual(w2_sliced(mu, nu, 4, seed=2), w2_sliced(mu, nu, 4, seed=2))

    def test_projection_count(self):
        mu = random_measure(np.random.default_rng(0), 4)
        with self.assertRaises(TransportException.InvalidProjectionCount):
            w2_sliced(mu, mu, n_proj=0)

    def test_unequal_sizes(self):
        rng = np.random.default_rng(0)
        with self.assertRaises(TransportException.UnsupportedMeasures):
            w2_sliced(random_measure(rng, 4), random_measure(rng, 5), n_proj=2)


class CouplingTestCase(SimpleTestCase):
    def test_zero_at_start(self):
        cloud = sample_cloud(uniform_ensemble(velocities=((0.2, 0.1),)), 100, seed=1)
        self.assertEqual(coupling_Q(cloud), 0.0)

    def test_hand_built_pair(self):
        cloud = ParticleCloud.from_samples(np.zeros((2, 2)), np.zeros((2, 2)))
        cloud = cloud.replace(
            x_vm=np.array([[1.0, 0.0], [0.0, 0.0]]), xi_vm=np.array([[0.0, 0.0], [0.0, 1.0]])
        )
        self.assertAlmostEqual(coupling_Q(cloud), 0.5, places=15)

    def test_periodic_gap(self):
        cloud = ParticleCloud.from_samples([[0.05]], [[0.0]])
        cloud = cloud.replace(x_vm=np.array([[TWO_PI - 0.05]]))
        self.assertAlmostEqual(coupling_Q(cloud), 0.5 * 0.01, places=12)

    def test_bound_on_perturbed_cloud(self):
        rng = np.random.default_rng(2)
        cloud = ParticleCloud.from_samples(
            rng.uniform(0.0, TWO_PI, size=(600, 2)), rng.normal(size=(600, 2))
        )
        cloud = cloud.replace(
            x_vm=np.mod(cloud.x0 + rng.normal(scale=0.05, size=(600, 2)), TWO_PI),
            xi_vm=cloud.xi0 + rng.normal(scale=0.05, size=(600, 2)),
            time=0.3,
        )
        bound = coupling_bound_check(cloud, subsample=200, seed=4)
        self.assertTrue(bound.holds)
        self.assertEqual(bound.subsample, 200)
        self.assertEqual(bound.seeds, (4, 5, 6))
        w2_sq, twice_q = subsampled_w2_sq(cloud, 200, 4)
        self.assertLessEqual(w2_sq, twice_q + 1e-12)
        self.assertIsNone(bound.w2_sliced_sq)

    def test_sliced_distance_of_the_full_cloud(self):
        rng = np.random.default_rng(5)
        cloud = ParticleCloud.from_samples(
            rng.uniform(0.0, TWO_PI, size=(300, 2)), rng.normal(size=(300, 2))
        )
        cloud = cloud.replace(
            x_vm=np.mod(cloud.x0 + 0.1, TWO_PI),
            xi_vm=cloud.xi0 + rng.normal(scale=0.05, size=(300, 2)),
        )
        bound = coupling_bound_check(cloud, subsample=100, seed=1, n_projections=16)
        self.assertGreater(bound.w2_sliced_sq, 0.0)
        # sliced W2² ≤ W2² ≤ 2Q for the full cloud
        self.assertLessEqual(bound.w2_sliced_sq, 2 * bound.q + 1e-12)
        again = coupling_bound_check(cloud, subsample=100, seed=1, n_projections=16)
        self.assertEqual(again.w2_sliced_sq, bound.w2_sliced_sq)
        coarse = coupling_bound_check(cloud, subsample=100, seed=1, n_projections=1)
        self.assertNotEqual(coarse.w2_sliced_sq, bound.w2_sliced_sq)


class LoeperTestCase(SimpleTestCase):
    def test_identical_densities(self):
        rho = trig(2, 4, ("cos", (1, 0), 0.3), const=1.0)
        result = loeper_check(rho, rho, n_samples=256, seed=0)
        self.assertEqual(result.lhs, 0.0)
        self.assertTrue(result.passed)

    def test_translated_density(self):
        shift, amplitude = 0.1, 0.3
        rho1 = trig(2, 4, ("cos", (1, 0), amplitude), const=1.0)
        rho2 = trig(
            2,
            4,
            ("cos", (1, 0), amplitude * np.cos(shift)),
            ("sin", (1, 0), amplitude * np.sin(shift)),
            const=1.0,
        )
        result = loeper_check(rho1, rho2, n_samples=512, seed=1)
        # ψ_i = amplitude·cos(x1 - s_i), so the gap is a single mode
        expected = amplitude * 2 * np.sin(shift / 2) / np.sqrt(2)
        self.assertAlmostEqual(result.lhs, expected, delta=1e-12)
        self.assertLess(result.lhs, result.rhs)
        self.assertTrue(result.passed)

    @given(seed=seeds)
    @hypothesis_settings(max_examples=10, deadline=None)
    def test_random_bounded_pairs(self, seed):
        rng = np.random.default_rng(seed)
        rho1, rho2 = random_density(rng, 2, 8), random_density(rng, 2, 8)
        self.assertTrue(loeper_check(rho1, rho2, n_samples=512, seed=seed).passed)

    def test_non_positive_density(self):
        rho = trig(2, 3, ("cos", (1, 0), 1.5), const=1.0)
        with self.assertRaises(TransportException.NonPositiveDensity):
            loeper_check(rho, SpectralField.constant(2, 3, [1.0]))
