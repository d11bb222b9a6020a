import tempfile
from pathlib import Path
from unittest.mock import patch

import numpy as np
from django.core.cache import cache
from django.test import SimpleTestCase, override_settings

from .utils import (
    NumericalAbort,
    TimeGrid,
    config_fingerprint,
    dump_state,
    memcache_lock,
    resolve_output_dir,
    seeded_rng,
)


class MemcacheLockTestCase(SimpleTestCase):
    def tearDown(self):
        cache.delete("run-LOCK-test")

    def test_second_holder_is_refused(self):
        with memcache_lock("run-LOCK-test", "worker-1") as first:
            self.assertTrue(first)
            with memcache_lock("run-LOCK-test", "worker-2") as second:
                self.assertFalse(second)
            self.assertEqual(cache.get("run-LOCK-test"), "worker-1")
        self.assertIsNone(cache.get("run-LOCK-test"))

    def test_expired_lock_is_not_released(self):
        with patch("core.utils.time.monotonic", side_effect=[0.0, 10.0]):
            with memcache_lock("run-LOCK-test", "worker-1", lock_expire=5) as acquired:
                self.assertTrue(acquired)
        self.assertEqual(cache.get("run-LOCK-test"), "worker-1")


class TimeGridTestCase(SimpleTestCase):
    def test_steps(self):
        grid = TimeGrid(0.5, 0.001)
        self.assertEqual(grid.n_steps, 500)
        self.assertAlmostEqual(grid.times[-1], 0.5, places=12)
        self.assertEqual(grid.refined().n_steps, 1000)

    def test_rejects_bad_steps(self):
        for t_final, dt in ((0.1, 0.0), (0.1, -0.01), (0.1, 0.03), (0.0, 0.01)):
            with self.subTest(t_final=t_final, dt=dt):
                with self.assertRaises(ValueError):
                    TimeGrid(t_final, dt)


class SeedingTestCase(SimpleTestCase):
    def test_streams_are_reproducible_and_independent(self):
        a = seeded_rng(7, "sampling").random(4)
        b = seeded_rng(7, "sampling").random(4)
        c = seeded_rng(7, "w2").random(4)
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, c))

    def test_fingerprint_ignores_key_order(self):
        self.assertEqual(config_fingerprint({"a": 1, "b": [1, 2]}), config_fingerprint({"b": [1, 2], "a": 1}))
        self.assertNotEqual(config_fingerprint({"a": 1}), config_fingerprint({"a": 2}))
        self.assertEqual(len(config_fingerprint({})), 16)


class OutputTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_relative_dirs_go_under_output_root(self):
        with override_settings(SIM_OUTPUT_ROOT=self.tmp.name):
            path = resolve_output_dir("pair2d/eps_0.1")
        self.assertEqual(path, Path(self.tmp.name) / "pair2d" / "eps_0.1")
        self.assertTrue(path.is_dir())

    def test_absolute_dirs_are_kept(self):
        target = Path(self.tmp.name) / "elsewhere"
        self.assertEqual(resolve_output_dir(target), target)

    def test_dump_state(self):
        path = dump_state(Path(self.tmp.name) / "abort_state.npz", rho=np.ones(3))
        with np.load(path) as archive:
            np.testing.assert_array_equal(archive["rho"], np.ones(3))

    def test_dump_failure_is_logged(self):
        self.assertIsNone(dump_state(Path(self.tmp.name) / "missing" / "abort_state.npz", rho=np.ones(3)))


class NumericalAbortTestCase(SimpleTestCase):
    def test_message_carries_time(self):
        self.assertEqual(str(NumericalAbort("validity gate violated", time=0.25)), "validity gate violated (t=0.25)")
        self.assertEqual(str(NumericalAbort("non-finite density")), "non-finite density")
