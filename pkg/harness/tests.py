import csv
import io
import json
import math
import tempfile
from pathlib import Path
from unittest.mock import patch

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings
from django.urls import reverse
from rest_framework.exceptions import ValidationError
from rest_framework.test import APITestCase
from scipy.integrate import cumulative_trapezoid

from core.utils import NumericalAbort
from lagrangian.checkpoints import write_checkpoint
from lagrangian.particles import ParticleCloud
from spectral.snapshots import read_snapshot
from transport.wasserstein import EmpiricalMeasure, w2_exact

from .config import RunConfig, parse_mode_table
from .ledger import NOT_APPLICABLE, HypothesisLedger, kappa_from_exponents
from .models import SimulationRun, SweepRun
from .osgood import minimal_constant, osgood_diagnostic, osgood_modulus
from .runner import RUN_COLUMNS, SINGLE_COLUMNS, read_rows, run_pair, run_single
from .sweep import SweepReport, fit_rate, validate_eps_list
from .verify import (
    CONSERVATION_LIMITS,
    EXACTNESS_LIMIT,
    VERIFY_SIZES,
    brute_force_w2,
    check_gate_abort,
    check_gauge,
    check_transport,
    check_wave_oscillator,
    verify_suite,
)

SMALL_VERIFY_SIZES = {
    "norm_pairs": 5,
    "projection_fields": 5,
    "ot_instances": 10,
    "ot_triples": 10,
    "loeper_pairs": 3,
    "loeper_samples": 1024,
}

BUNDLED = ("small2d", "pair2d", "sweep2d", "ck2d", "vp1d")

STATIONARY_INI = """
[run]
dim = 2
cutoff = 4
eps = {eps}
t_final = 0.04
dt = 0.01
n_particles = 64
subsample = 64
snapshot_every = 2
output_dir = stationary

[phase.rest]
weight = 1.0
rho = 1.0
xi_1 = 0.0
xi_2 = 0.0
"""


def stationary_config(eps="0.2"):
    return RunConfig.from_ini(STATIONARY_INI.format(eps=eps))


def small_config(**overrides):
    cfg = RunConfig.from_ini("bundled/small2d", ["run.t_final=0.04", "run.n_particles=64", "run.subsample=64"])
    return cfg.replace(**overrides) if overrides else cfg


def ledger_row(**values):
    row = {
        "sup_rho_vm": 1.0,
        "l1_rho_vm": 1.0,
        "sup_m_alpha": 0.0,
        "eps_adot_l2": 0.0,
        "b_l2": 0.0,
        "sup_rho_vp": 1.0,
        "fourth_moment_vp": 0.0,
        "rho_delta1": 1.0,
        "xi_delta1": 0.0,
        "fields_delta1": 0.0,
        "energy_vm": 0.5,
    }
    row.update(values)
    return row


class RunConfigTestCase(SimpleTestCase):
    def test_bundled_configs_load(self):
        for name in BUNDLED:
            cfg = RunConfig.from_ini(f"bundled/{name}")
            self.assertTrue(cfg.phases)
            self.assertEqual(len(cfg.phases[0].xi), cfg.dim)

    def test_sweep_config_lists_four_eps(self):
        cfg = RunConfig.from_ini("bundled/sweep2d")
        self.assertEqual(cfg.eps, (0.4, 0.2, 0.1, 0.05))

    def test_ini_round_trip(self):
        for name in BUNDLED:
            cfg = RunConfig.from_ini(f"bundled/{name}")
            self.assertEqual(RunConfig.from_ini(cfg.to_ini()), cfg)

    def test_payload_round_trip(self):
        cfg = RunConfig.from_ini("bundled/pair2d")
        self.assertEqual(RunConfig.from_payload(cfg.to_dict()), cfg)
        self.assertEqual(json.loads(json.dumps(cfg.to_dict())), cfg.to_dict())

    def test_overrides(self):
        cfg = RunConfig.from_ini("bundled/small2d", ["run.dt=0.005", "phase.up.weight=0.5", "run.eps=0.4,0.1"])
        self.assertEqual(cfg.dt, 0.005)
        self.assertEqual(cfg.eps, (0.4, 0.1))
        self.assertEqual(cfg.phases[0].weight, 0.5)

    def test_malformed_override(self):
        with self.assertRaises(ValidationError):
            RunConfig.from_ini("bundled/small2d", ["run.dt"])

    def test_unknown_key_is_named(self):
        with self.assertRaises(ValidationError) as cm:
            RunConfig.from_ini("bundled/small2d", ["run.bogus=1"])
        self.assertIn("run.bogus", cm.exception.detail)

    def test_unknown_section(self):
        with self.assertRaises(ValidationError):
            RunConfig.from_ini("bundled/small2d", ["plasma.density=1"])

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            RunConfig.from_ini("bundled/missing")

    def test_rejected_values(self):
        cases = {
            "eps": "run.eps=1.5",
            "dt": "run.dt=0.03",
            "kappa": "hypotheses.gamma2=0.3",
            "delta1": "norms.delta1=1.6",
            "norm_beta": "norms.beta=1.0",
        }
        for key, override in cases.items():
            with self.subTest(key=key):
                with self.assertRaises(ValidationError) as cm:
                    RunConfig.from_ini("bundled/small2d", [override])
                self.assertIn(key, cm.exception.detail)

    def test_velocity_components_follow_dimension(self):
        with self.assertRaises(ValidationError) as cm:
            RunConfig.from_ini("bundled/vp1d", ["run.dim=2"])
        self.assertIn("phases", cm.exception.detail)

    def test_magnetic_table_count(self):
        with self.assertRaises(ValidationError) as cm:
            RunConfig.from_ini("bundled/small2d", ["run.dim=3"])
        self.assertIn("b0", cm.exception.detail)

    def test_mode_outside_cutoff(self):
        with self.assertRaises(ValidationError) as cm:
            RunConfig.from_ini("bundled/small2d", ["phase.up.rho=1.0 ; cos 9,0 0.1"])
        self.assertIn("mode_table", cm.exception.detail)

    def test_mode_table_grammar(self):
        const, terms = parse_mode_table("1.0 ; cos 1,0 0.1 ; 0.5 ; sin 0,2 -0.3")
        self.assertEqual(const, 1.5)
        self.assertEqual(terms, [("cos", (1, 0), 0.1), ("sin", (0, 2), -0.3)])
        with self.assertRaises(ValueError):
            parse_mode_table("tan 1,0 0.1")


class LedgerTestCase(SimpleTestCase):
    def test_kappa(self):
        self.assertAlmostEqual(kappa_from_exponents(0.5, 0.1, 0.2, 0.1), 0.2, places=14)
        self.assertAlmostEqual(kappa_from_exponents(0.9, 0.0, 0.5, 0.0), 0.5, places=14)

    def test_every_hypothesis_has_an_entry(self):
        ledger = HypothesisLedger(eps=0.2, dim=2, alpha=0.5, beta=0.0, gamma1=0.0, gamma2=0.0, c0=1.0)
        ledger.observe(ledger_row())
        names = {entry["hypothesis"] for entry in ledger.entries()}
        self.assertEqual(
            names,
            {
                "density_l1_linf",
                "moment_alpha",
                "transverse_electric_l2",
                "magnetic_l2",
                "vp_density_linf",
                "vp_fourth_moment_l1",
                "initial_energy",
                "mean_initial_electric_field",
            },
        )

    def test_magnetic_entry_not_applicable_in_one_dimension(self):
        ledger = HypothesisLedger(eps=0.2, dim=1, alpha=0.5, beta=0.0, gamma1=0.0, gamma2=0.0, c0=1.0)
        ledger.observe(ledger_row())
        entry = next(e for e in ledger.entries() if e["hypothesis"] == "magnetic_l2")
        self.assertEqual(entry["measured"], NOT_APPLICABLE)
        self.assertEqual(entry["holds"], NOT_APPLICABLE)

    def test_scaled_bound(self):
        ledger = HypothesisLedger(eps=0.25, dim=2, alpha=0.9, beta=0.5, gamma1=0.0, gamma2=0.0, c0=1.0)
        ledger.observe(ledger_row(sup_m_alpha=2.0))
        ledger.observe(ledger_row(sup_m_alpha=1.0, energy_vm=0.7))
        entry = next(e for e in ledger.entries() if e["hypothesis"] == "moment_alpha")
        self.assertEqual(entry["measured"], 2.0)
        self.assertAlmostEqual(entry["normalized"], 1.0, places=14)
        self.assertTrue(entry["holds"])
        self.assertEqual(ledger.initial_energy, 0.5)

    def test_mean_field_bound(self):
        ledger = HypothesisLedger(
            eps=0.2, dim=2, alpha=0.5, beta=0.0, gamma1=0.0, gamma2=0.0, c0=1.0, mean_e0=0.05, mean_e0_bound=0.04
        )
        entry = next(e for e in ledger.entries() if e["hypothesis"] == "mean_initial_electric_field")
        self.assertFalse(entry["holds"])


class OsgoodTestCase(SimpleTestCase):
    def test_zero_series(self):
        self.assertEqual(minimal_constant([0.0, 0.1, 0.2], [0.0, 0.0, 0.0], 0.1, 0.5), 0.0)

    def test_modulus(self):
        np.testing.assert_allclose(osgood_modulus([0.0, 2.0]), [0.0, 2.0])
        self.assertAlmostEqual(float(osgood_modulus(0.1)), 0.1 * (1 + math.log(10)), places=14)

    def test_two_point_series_by_hand(self):
        eps, kappa, t = 0.25, 0.5, 0.1
        q1 = eps**kappa * t
        integral = 0.5 * t * q1 * (1 + math.log(1 / q1))
        expected = q1 / ((1 + t) ** 2 * (eps**kappa + integral))
        self.assertAlmostEqual(minimal_constant([0.0, t], [0.0, q1], eps, kappa), expected, places=12)

    def test_constant_is_minimal(self):
        rng = np.random.default_rng(3)
        times = np.linspace(0.0, 0.5, 11)
        q = np.cumsum(rng.uniform(0.0, 1e-3, size=11))
        c = minimal_constant(times, q, 0.2, 0.5)
        envelope = (1.5) ** 2 * (0.2**0.5 + cumulative_trapezoid(osgood_modulus(q), times, initial=0.0))
        self.assertTrue(np.all(q <= c * envelope * (1 + 1e-12)))
        self.assertAlmostEqual(float(np.max(q / (c * envelope))), 1.0, places=12)

    def test_refinement_stability(self):
        report = {
            "eps": 0.2,
            "t_final": 0.2,
            "ledger": {"kappa": 0.5},
            "rows": [{"t": 0.0, "q": 0.0}, {"t": 0.1, "q": 1e-3}, {"t": 0.2, "q": 3e-3}],
        }
        same = osgood_diagnostic(report, report)
        self.assertEqual(same.relative_change, 0.0)
        self.assertTrue(same.stable)

        shifted = {**report, "rows": [{"t": r["t"], "q": 1.5 * r["q"]} for r in report["rows"]]}
        self.assertFalse(osgood_diagnostic(report, shifted).stable)
        self.assertIsNone(osgood_diagnostic(report).stable)


class SweepReportTestCase(SimpleTestCase):
    def test_power_law_rate(self):
        eps = [0.4, 0.2, 0.1, 0.05]
        slope, r_squared = fit_rate(eps, [3 * e**1.5 for e in eps])
        self.assertAlmostEqual(slope, 1.5, places=10)
        self.assertAlmostEqual(r_squared, 1.0, places=10)

    def test_vanishing_distances_give_no_rate(self):
        self.assertEqual(fit_rate([0.4, 0.2, 0.1], [0.0, 0.0, 0.0]), (None, None))

    def test_needs_three_points(self):
        with self.assertRaises(ValidationError) as cm:
            validate_eps_list([0.2])
        self.assertIn("eps", cm.exception.detail)
        with self.assertRaises(ValidationError):
            validate_eps_list([0.2, 0.2, 0.1])

    def test_monotone_and_partial(self):
        report = SweepReport(eps_list=(0.4, 0.2, 0.1), kappa=0.5, t_final=0.5)
        for eps, w2 in ((0.4, 0.3), (0.2, 0.1), (0.1, 0.04)):
            report.members.append(
                {"eps": eps, "sup_w2": w2, "max_q": w2, "aborted": False, "truncation_time": None, "osgood_c": 1.0}
            )
        summary = report.to_dict()
        self.assertTrue(summary["monotone"])
        self.assertFalse(summary["partial"])
        self.assertAlmostEqual(summary["kappa_floor"], 0.5 * math.exp(-2.25), places=14)

        report.members[-1] = {**report.members[-1], "aborted": True, "truncation_time": 0.3}
        self.assertTrue(report.partial)


class RunPairTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_stationary_data_stay_coupled(self):
        report = run_pair(stationary_config(), 0.2, output_dir=self.root / "rest")
        self.assertFalse(report.aborted)
        np.testing.assert_allclose([row["t"] for row in report.rows], [0.0, 0.02, 0.04], atol=1e-14)
        for row in report.rows:
            self.assertEqual(row["q"], 0.0)
            self.assertEqual(row["w2_sq"], 0.0)
            self.assertTrue(row["coupling_holds"])
        self.assertEqual(report.osgood["c"], 0.0)

    def test_report_files(self):
        directory = self.root / "small"
        report = run_pair(small_config(), 0.2, output_dir=directory)
        with (directory / "run.csv").open(newline="") as stream:
            rows = list(csv.reader(stream))
        self.assertEqual(tuple(rows[0]), RUN_COLUMNS)
        self.assertEqual(len(rows) - 1, len(report.rows))

        payload = json.loads((directory / "report.json").read_text())
        self.assertEqual(payload["eps"], 0.2)
        self.assertEqual(len(payload["ledger"]["entries"]), 8)
        self.assertIn("c", payload["osgood"])
        self.assertEqual(len(list((directory / "checkpoints").glob("cloud_*.npz"))), len(report.rows))
        self.assertTrue((directory / "fields_final.snap").exists())

    def test_field_diagnostics_are_streamed_every_step(self):
        directory = self.root / "small"
        run_pair(small_config(), 0.2, output_dir=directory)
        rows = read_rows(directory / "fields.csv")
        np.testing.assert_allclose([row["t"] for row in rows], [0.0, 0.01, 0.02, 0.03, 0.04], atol=1e-14)
        self.assertEqual(
            set(rows[0]), {"t", "field_energy", "gauge_div_a", "gauge_mean_a", "ledger_residual", "mean_b_1"}
        )
        for row in rows:
            self.assertLessEqual(row["ledger_residual"], CONSERVATION_LIMITS["ledger_residual"])
            self.assertAlmostEqual(row["mean_b_1"], 0.1, places=12)

    def test_snapshot_header_carries_the_phase_table(self):
        directory = self.root / "small"
        cfg = small_config()
        run_pair(cfg, 0.2, output_dir=directory)
        header, fields = read_snapshot(directory / "fields_final.snap")
        self.assertEqual(
            header["meta"]["phases"],
            [{"id": 0, "label": "up", "weight": 0.5}, {"id": 1, "label": "down", "weight": 0.5}],
        )
        self.assertAlmostEqual(header["meta"]["t"], 0.04, places=12)
        self.assertEqual(header["meta"]["eps"], 0.2)
        self.assertEqual(
            {name for name in fields if name.startswith("rho_")},
            {"rho_vm_0", "rho_vm_1", "rho_vp_0", "rho_vp_1"},
        )

    def test_sliced_distance_column(self):
        report = run_pair(stationary_config(), 0.2, output_dir=self.root / "rest")
        for row in report.rows:
            self.assertAlmostEqual(row["w2_sliced_sq"], 0.0, places=14)
        report = run_pair(small_config(), 0.2, output_dir=self.root / "small")
        for row in report.rows:
            self.assertLessEqual(row["w2_sliced_sq"], 2 * row["q"] + 1e-12)

    def test_sliced_distance_uses_configured_projections(self):
        with patch("transport.coupling.w2_sliced", return_value=0.0) as sliced:
            run_pair(stationary_config(), 0.2, output_dir=self.root / "rest")
        self.assertEqual({c.args[2] for c in sliced.call_args_list}, {64})
        with patch("transport.coupling.w2_sliced", return_value=0.0) as sliced:
            run_pair(small_config(), 0.2, output_dir=self.root / "small")
        self.assertEqual({c.args[2] for c in sliced.call_args_list}, {32})

    def test_magnetic_mean_and_gauge_conserved(self):
        report = run_pair(small_config(), 0.2, output_dir=self.root / "small")
        for row in report.rows:
            for key, limit in CONSERVATION_LIMITS.items():
                self.assertLessEqual(row[key], limit, key)
            self.assertLessEqual(row["gauge_div_a"], EXACTNESS_LIMIT)
            self.assertLessEqual(row["gauge_mean_a"], EXACTNESS_LIMIT)

    def test_reruns_are_bitwise_identical(self):
        first = self.root / "a"
        second = self.root / "b"
        run_pair(small_config(), 0.2, output_dir=first)
        run_pair(small_config(), 0.2, output_dir=second)
        self.assertEqual((first / "run.csv").read_bytes(), (second / "run.csv").read_bytes())

    def test_abort_truncates_the_report(self):
        directory = self.root / "aborted"
        with patch("harness.runner.PairedRun.step", side_effect=NumericalAbort("validity gate violated", time=0.01)):
            report = run_pair(stationary_config(), 0.2, output_dir=directory)
        self.assertTrue(report.aborted)
        self.assertEqual(report.truncation_time, 0.01)
        self.assertEqual(len(report.rows), 1)
        self.assertTrue(Path(report.dump_path).exists())
        self.assertTrue(json.loads((directory / "report.json").read_text())["aborted"])


class SingleRunTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_vp_run_files(self):
        directory = self.root / "vp"
        report = run_single(stationary_config(), 0.2, "vp", output_dir=directory)
        self.assertFalse(report.aborted)
        self.assertEqual(report.eps, 0.0)
        with (directory / "run.csv").open(newline="") as stream:
            self.assertEqual(tuple(next(csv.reader(stream))), SINGLE_COLUMNS)
        self.assertEqual(len(read_rows(directory / "run.csv")), 3)
        self.assertTrue((directory / "density_final.csv").exists())
        self.assertFalse((directory / "fields.csv").exists())
        header, fields = read_snapshot(directory / "fields_final.snap")
        self.assertEqual(header["meta"]["system"], "vp")
        self.assertEqual(header["meta"]["eps"], 0.0)
        self.assertEqual(header["meta"]["phases"], [{"id": 0, "label": "rest", "weight": 1.0}])
        self.assertEqual(set(fields), {"rho_0", "xi_0"})

    def test_vm_run_streams_field_diagnostics(self):
        directory = self.root / "vm"
        report = run_single(small_config(), 0.2, "vm", output_dir=directory)
        self.assertFalse(report.aborted)
        self.assertLessEqual(report.energy_drift, 1e-4)
        rows = read_rows(directory / "fields.csv")
        self.assertEqual(len(rows), 5)
        for row in rows:
            self.assertLessEqual(row["ledger_residual"], 1e-8)
            self.assertLessEqual(row["gauge_div_a"], EXACTNESS_LIMIT)
        header, fields = read_snapshot(directory / "fields_final.snap")
        self.assertEqual(header["meta"]["system"], "vm")
        self.assertIn("eps_adot", fields)

    def test_stationary_vm_run_stays_at_rest(self):
        report = run_single(stationary_config(), 0.2, "vm", output_dir=self.root / "vm")
        for row in report.rows:
            self.assertAlmostEqual(row["energy_drift"], 0.0, places=14)
            self.assertAlmostEqual(row["mean_j_drift"], 0.0, places=14)

    def test_unknown_system(self):
        with self.assertRaises(ValueError):
            run_single(stationary_config(), 0.2, "pair", output_dir=self.root / "pair")


class VerifyChecksTestCase(SimpleTestCase):
    def test_gauge_fault_is_detected(self):
        cfg = small_config()
        self.assertTrue(check_gauge(cfg, 0.2, ())[0].passed)
        self.assertFalse(check_gauge(cfg, 0.2, ("gauge",))[0].passed)

    def test_gate_abort_is_an_expected_failure(self):
        [result] = check_gate_abort(small_config(), 0.2)
        self.assertTrue(result.expected_fail)
        self.assertTrue(result.passed)

    def test_wave_oscillator(self):
        self.assertTrue(all(c.passed for c in check_wave_oscillator()))

    def test_transport(self):
        checks = check_transport(np.random.default_rng(1), n_instances=10, n_triples=10)
        self.assertEqual(
            [c.name for c in checks], ["ot_brute_force", "ot_identity", "ot_symmetry", "ot_triangle"]
        )
        self.assertTrue(all(c.passed for c in checks))

    def test_brute_force_reaches_eight_points(self):
        rng = np.random.default_rng(2)
        mu = EmpiricalMeasure(rng.uniform(0, 2 * np.pi, size=(8, 2)), rng.normal(size=(8, 2)))
        shuffled = EmpiricalMeasure(mu.positions[::-1], mu.velocities[::-1])
        self.assertAlmostEqual(brute_force_w2(mu, shuffled), 0.0, places=14)
        self.assertAlmostEqual(brute_force_w2(mu, mu), w2_exact(mu, mu), places=14)

    def test_battery_defaults_to_acceptance_sizes(self):
        self.assertEqual(
            VERIFY_SIZES,
            {
                "norm_pairs": 100,
                "projection_fields": 100,
                "ot_instances": 200,
                "ot_triples": 100,
                "loeper_pairs": 50,
                "loeper_samples": 4096,
            },
        )
        calls = self.run_battery()
        calls["check_norm_algebra"].assert_called_once()
        self.assertEqual(calls["check_norm_algebra"].call_args.kwargs, {"n_pairs": 100})
        self.assertEqual(calls["check_projections"].call_args.kwargs, {"n_fields": 100})
        self.assertEqual(calls["check_transport"].call_args.kwargs, {"n_instances": 200, "n_triples": 100})
        self.assertEqual(calls["check_loeper"].call_args.kwargs, {"n_pairs": 50, "n_samples": 4096})

    def test_battery_sizes_can_be_lowered(self):
        calls = self.run_battery(sizes={"loeper_pairs": 2, "ot_instances": 5})
        self.assertEqual(calls["check_loeper"].call_args.kwargs, {"n_pairs": 2, "n_samples": 4096})
        self.assertEqual(calls["check_transport"].call_args.kwargs, {"n_instances": 5, "n_triples": 100})
        with self.assertRaises(ValidationError) as cm:
            self.run_battery(sizes={"loeper_seeds": 2})
        self.assertIn("sizes", cm.exception.detail)

    def run_battery(self, sizes=None):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        names = (
            "check_norm_algebra",
            "check_projections",
            "check_wave_oscillator",
            "check_gauge",
            "check_velocity_bound",
            "check_log_lipschitz",
            "check_pair_run",
            "check_gate_abort",
            "check_transport",
            "check_loeper",
        )
        calls = {}
        for name in names:
            patcher = patch(f"harness.verify.{name}", return_value=[])
            calls[name] = patcher.start()
            self.addCleanup(patcher.stop)
        verify_suite(small_config(), output_dir=tmp.name, sizes=sizes)
        return calls


class SimulationRunAPITestCase(APITestCase):
    def setUp(self):
        self.sweep = SweepRun.objects.create(fingerprint="abc", config={}, eps_list=[0.4, 0.2, 0.1])
        self.pair = SimulationRun.objects.create(mode=SimulationRun.Mode.PAIR, eps=0.2, config={}, fingerprint="f1")
        for eps in (0.4, 0.2, 0.1):
            SimulationRun.objects.create(
                mode=SimulationRun.Mode.SWEEP, eps=eps, config={}, fingerprint="abc", sweep=self.sweep
            )

    def test_list_filters_by_mode(self):
        response = self.client.get(reverse("HARNESS:run-list"), {"mode": "sweep"})
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.data["count"], 3)

    def test_list_filters_by_eps_range(self):
        response = self.client.get(reverse("HARNESS:run-list"), {"eps_min": 0.15, "eps_max": 0.3})
        self.assertEqual(response.data["count"], 2)

    def test_detail_includes_report(self):
        self.pair.record({"aborted": True, "truncation_time": 0.3, "output_dir": "runs/x"})
        response = self.client.get(reverse("HARNESS:run-detail", kwargs={"pk": self.pair.pk}))
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.data["status"], SimulationRun.Status.ABORTED)
        self.assertEqual(response.data["truncation_time"], 0.3)
        self.assertEqual(response.data["report"]["output_dir"], "runs/x")

    def test_sweeps_nest_members(self):
        response = self.client.get(reverse("HARNESS:sweep-list"))
        self.assertEqual(response.data["count"], 1)
        self.assertEqual(len(response.data["results"][0]["members"]), 3)

    def test_api_is_read_only(self):
        response = self.client.post(reverse("HARNESS:run-list"), {"mode": "pair"})
        self.assertEqual(response.status_code, 405)


class CommandTestCase(APITestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)
        settings_patch = override_settings(SIM_OUTPUT_ROOT=self.root, IS_TESTING=True)
        settings_patch.enable()
        self.addCleanup(settings_patch.disable)

    def write_config(self, eps="0.2"):
        path = self.root / "stationary.ini"
        path.write_text(STATIONARY_INI.format(eps=eps))
        return str(path)

    def call(self, *args, **options):
        out = io.StringIO()
        call_command(*args, stdout=out, **options)
        return out.getvalue()

    def assertExitCode(self, code, *args, **options):
        with self.assertRaises(CommandError) as cm:
            self.call(*args, **options)
        self.assertEqual(cm.exception.returncode, code)

    def test_missing_config(self):
        self.assertExitCode(2, "simulate")
        self.assertExitCode(2, "simulate", config="bundled/missing")

    def test_invalid_override(self):
        self.assertExitCode(2, "simulate", config=self.write_config(), overrides=["run.eps=2"])

    def test_simulate_records_runs(self):
        self.call("simulate", config=self.write_config("0.4,0.2"))
        self.assertEqual(SimulationRun.objects.filter(status=SimulationRun.Status.FINISHED).count(), 2)
        self.assertTrue((self.root / "stationary" / "eps_0.2" / "run.csv").exists())

    def test_simulate_dispatches_vm_mode(self):
        out = self.call("simulate", config=self.write_config("0.4,0.2"), overrides=["run.mode=vm"])
        lines = [json.loads(line) for line in out.splitlines()]
        self.assertEqual([line["mode"] for line in lines], ["vm", "vm"])
        self.assertEqual(SimulationRun.objects.filter(mode=SimulationRun.Mode.VM).count(), 2)
        directory = self.root / "stationary" / "vm" / "eps_0.2"
        self.assertTrue((directory / "fields.csv").exists())
        self.assertFalse((directory / "checkpoints").exists())

    def test_simulate_dispatches_vp_mode(self):
        out = self.call("simulate", config=self.write_config("0.4,0.2"), overrides=["run.mode=vp"])
        (line,) = [json.loads(line) for line in out.splitlines()]
        self.assertEqual(line["mode"], "vp")
        self.assertEqual(line["eps"], 0.0)
        run = SimulationRun.objects.get()
        self.assertEqual(run.mode, SimulationRun.Mode.VP)
        self.assertTrue((self.root / "stationary" / "vp" / "density_final.csv").exists())

    def test_simulate_dispatches_ck_mode(self):
        out = self.call("simulate", config=self.write_config(), overrides=["run.mode=ck"], iterations=4)
        result = json.loads(out)
        self.assertEqual(result["mode"], "ck")
        self.assertFalse(result["diverged"])
        self.assertEqual(SimulationRun.objects.get().mode, SimulationRun.Mode.CK)
        self.assertTrue((self.root / "stationary" / "ck" / "ck.json").exists())

    def test_simulate_pair_mode_runs_both_systems(self):
        out = self.call("simulate", config=self.write_config(), overrides=["run.mode=pair"])
        self.assertEqual(json.loads(out)["mode"], "pair")
        directory = self.root / "stationary" / "eps_0.2"
        self.assertTrue((directory / "checkpoints").exists())
        self.assertTrue((directory / "fields.csv").exists())

    def test_simulate_abort_exits_three(self):
        with patch("harness.runner.PairedRun.step", side_effect=NumericalAbort("validity gate violated", time=0.01)):
            self.assertExitCode(3, "simulate", config=self.write_config())
        run = SimulationRun.objects.get()
        self.assertTrue(run.is_aborted)
        self.assertEqual(run.truncation_time, 0.01)

    def test_report_replays_checkpoints(self):
        self.call("simulate", config=self.write_config())
        out = self.call("report", str(self.root / "stationary" / "eps_0.2"))
        result = json.loads(out)
        self.assertEqual(result["max_q_gap"], 0.0)
        self.assertEqual(result["osgood"]["c"], 0.0)

    def test_sweep_needs_three_eps(self):
        self.assertExitCode(2, "sweep", config=self.write_config("0.2"))

    def test_sweep_writes_summary(self):
        out = self.call("sweep", config=self.write_config("0.4,0.2,0.1"))
        summary = json.loads(out)
        self.assertFalse(summary["partial"])
        self.assertIsNone(summary["kappa_measured"])
        sweep = SweepRun.objects.get()
        self.assertEqual(sweep.members.count(), 3)
        self.assertTrue((self.root / "stationary" / "sweep.csv").exists())
        payload = json.loads((self.root / "stationary" / "sweep.json").read_text())
        self.assertEqual(len(payload["members"]), 3)

    def test_ck_on_fixed_point(self):
        out = self.call("ck", config=self.write_config(), iterations=4)
        result = json.loads(out)
        self.assertFalse(result["diverged"])
        self.assertEqual(result["stepped_gap"], 0.0)
        self.assertTrue((self.root / "stationary" / "ck" / "ck.json").exists())

    def test_wasserstein_between_checkpoints(self):
        rng = np.random.default_rng(0)
        cloud = ParticleCloud.from_samples(rng.uniform(0, 2 * np.pi, size=(16, 2)), rng.normal(size=(16, 2)))
        path = write_checkpoint(self.root / "clouds", cloud, 0)
        exact = json.loads(self.call("wasserstein", str(path), str(path)))
        self.assertEqual(exact["w2"], 0.0)
        self.assertEqual(exact["method"], "exact")
        sliced = json.loads(self.call("wasserstein", str(path), str(path), sliced=True, projections=8))
        self.assertAlmostEqual(sliced["w2"], 0.0, places=12)

    def test_wasserstein_missing_file(self):
        self.assertExitCode(2, "wasserstein", str(self.root / "a.npz"), str(self.root / "b.npz"))

    @patch.dict("harness.verify.VERIFY_SIZES", SMALL_VERIFY_SIZES)
    def test_verify_bundled_small_config(self):
        self.call("verify", config="bundled/small2d")
        run = SimulationRun.objects.get(mode=SimulationRun.Mode.VERIFY)
        self.assertTrue(run.report["ok"], [c for c in run.report["checks"] if not c["passed"]])
        self.assertTrue((self.root / "small2d" / "verify" / "verify.json").exists())
        refined = json.loads((self.root / "small2d" / "verify" / "refined" / "report.json").read_text())
        self.assertEqual(refined["dt"], 0.005)
