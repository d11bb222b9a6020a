"""Invariant battery over every layer; each check yields a row, never an exception."""
import itertools
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from rest_framework.exceptions import ValidationError

from core.utils import NumericalAbort, TimeGrid, resolve_output_dir, seeded_rng
from fields.electromagnetic import EMState, gauge_residuals, wave_step
from lagrangian.particles import relativistic_speed
from multifluid.ensemble import GATE_LIMIT, check_state, gate_value, total_density
from spectral.calculus import (
    biot_savart,
    curl,
    derivative,
    divergence_residual,
    gradient,
    helmholtz_decompose,
    leray_project,
    mean,
    multiply,
    solve_poisson,
)
from spectral.fourier import SpectralField, evaluate_at
from spectral.norms import analytic_norm
from spectral.testing import random_density, random_divergence_free, random_field
from transport.coupling import loeper_check
from transport.wasserstein import EmpiricalMeasure, cost_matrix, w2_exact

from .config import RunConfig
from .initial_data import build_ensemble, initial_state
from .osgood import STABILITY_TOLERANCE, osgood_diagnostic
from .runner import run_pair

FAULTS = ("gauge",)
NORM_DELTAS = (1.2, 1.5, 2.0)
CONSERVATION_LIMITS = {
    "mean_b_drift": 1e-12,
    "mean_j_vp_drift": 1e-8,
    "ledger_residual": 1e-8,
}
ENERGY_DRIFT_LIMIT = 1e-4
CONSISTENCY_LIMIT = 1e-3
EXACTNESS_LIMIT = 1e-12
TRIANGLE_LIMIT = 1e-10
WAVE_LIMIT = 1e-10
VERIFY_SIZES = {
    "norm_pairs": 100,
    "projection_fields": 100,
    "ot_instances": 200,
    "ot_triples": 100,
    "loeper_pairs": 50,
    "loeper_samples": 4096,
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float = None
    threshold: float = None
    expected_fail: bool = False
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    @property
    def ok(self) -> bool:
        return not self.failures

    def get(self, name) -> CheckResult:
        return next(c for c in self.checks if c.name == name)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "n_checks": len(self.checks),
            "n_failures": len(self.failures),
            "checks": [c.to_dict() for c in self.checks],
        }

    def write(self, directory) -> Path:
        path = Path(directory) / "verify.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path


def _bounded(name, measured, threshold, detail=""):
    measured = float(measured)
    return CheckResult(
        name=name,
        passed=bool(np.isfinite(measured) and measured <= threshold),
        measured=measured,
        threshold=threshold,
        detail=detail,
    )


# spectral


def check_norm_algebra(rng, n_pairs=VERIFY_SIZES["norm_pairs"], dim=2, cutoff=8):
    """|fg|_δ ≤ |f|_δ|g|_δ and |∂f|_δ' ≤ δ/(δ-δ')|f|_δ as worst ratios."""
    worst_product, worst_derivative = 0.0, 0.0
    for _ in range(n_pairs):
        f = random_field(rng, dim, cutoff)
        g = random_field(rng, dim, cutoff)
        for delta in NORM_DELTAS:
            bound = analytic_norm(f, delta) * analytic_norm(g, delta)
            worst_product = max(worst_product, analytic_norm(multiply(f, g), delta) / bound)
            inner = 1 + (delta - 1) / 2
            bound = delta / (delta - inner) * analytic_norm(f, delta)
            for axis in range(dim):
                worst_derivative = max(
                    worst_derivative, analytic_norm(derivative(f, axis), inner) / bound
                )
    return [
        _bounded("norm_product", worst_product, 1 + 1e-10),
        _bounded("norm_derivative", worst_derivative, 1 + 1e-10),
    ]


def check_projections(rng, n_fields=VERIFY_SIZES["projection_fields"], cutoff=6):
    residual = 0.0
    for _ in range(n_fields):
        for dim in (2, 3):
            F = random_field(rng, dim, cutoff, components=dim)
            P = leray_project(F)
            grad_part, divfree = helmholtz_decompose(F)
            residual = max(
                residual,
                float(np.max(np.abs((leray_project(P) - P).coeffs))),
                divergence_residual(P),
                float(np.max(np.abs((grad_part + divfree - F).coeffs))),
            )
            B = random_divergence_free(rng, dim, cutoff).shifted([0.3] * (3 if dim == 3 else 1))
            A = biot_savart(B)
            residual = max(
                residual,
                float(np.max(np.abs((curl(A) - B.shifted(-mean(B))).coeffs))),
                divergence_residual(A),
                float(np.linalg.norm(mean(A))),
            )
    return [_bounded("projections", residual, EXACTNESS_LIMIT)]


# fields


def _single_mode_state(eps, A=None, eps_adot=None, cutoff=2):
    zero = SpectralField.zeros(2, cutoff, 2)
    return EMState(
        eps=eps,
        phi=SpectralField.zeros(2, cutoff),
        A=zero if A is None else A,
        eps_adot=zero if eps_adot is None else eps_adot,
        mean_b0=np.zeros(1),
    )


def check_wave_oscillator(t_final=0.1):
    """Source-free single modes rotate at frequency |k|/ε regardless of dt."""
    mode = SpectralField.from_terms(2, 2, [(0.0, []), (0.0, [("cos", (1, 0), 1.0)])])
    zero_source = SpectralField.zeros(2, 2, 2)
    error = 0.0
    for eps in (0.4, 0.05):
        for dt in (1e-2, 1e-3):
            position = _single_mode_state(eps, A=mode)
            velocity = _single_mode_state(eps, eps_adot=mode)
            for _ in range(int(round(t_final / dt))):
                position = wave_step(position, zero_source, dt)
                velocity = wave_step(velocity, zero_source, dt)
            t = position.time
            error = max(
                error,
                float(np.max(np.abs(position.A.coeffs - np.cos(t / eps) * mode.coeffs))),
                float(np.max(np.abs(velocity.A.coeffs - np.sin(t / eps) * mode.coeffs))),
            )
    return [_bounded("wave_oscillator", error, WAVE_LIMIT)]


def check_gauge(cfg, eps, faults):
    ens, em = initial_state(cfg, eps)
    em = wave_step(em, SpectralField.zeros(em.dim, em.cutoff, em.dim), cfg.dt)
    if "gauge" in faults:
        em = em.replace(A=em.A.shifted([0.1] * em.dim))
    div_a, mean_a = gauge_residuals(em)
    detail = "fault injected: A carries a mean" if "gauge" in faults else ""
    return [_bounded("gauge", max(div_a, mean_a), EXACTNESS_LIMIT, detail)]


def check_velocity_bound(rng, eps_values, cutoff=6):
    """|v(ξ) - ξ| ≤ ε|ξ|²/sqrt(1+ε²|ξ|²) on the collocation grid."""
    xi = random_field(rng, 2, cutoff, components=2, scale=0.5)
    samples = xi.to_grid().reshape(2, -1).T
    excess = -np.inf
    for eps in eps_values:
        speed_sq = np.sum(samples**2, axis=1)
        bound = eps * speed_sq / np.sqrt(1 + eps**2 * speed_sq)
        gap = np.linalg.norm(relativistic_speed(samples, eps) - samples, axis=1)
        excess = max(excess, float(np.max(gap - bound)))
    return [_bounded("velocity_bound", excess, 1e-14)]


# multifluid and particle runs


def log_lipschitz_modulus(field: SpectralField, rng, n_pairs, min_scale):
    """sup over sampled pairs of |f(x)-f(y)| / (r(1 + log⁺(1/r)))."""
    dim = field.dim
    x = rng.uniform(0, 2 * np.pi, size=(n_pairs, dim))
    direction = rng.normal(size=(n_pairs, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = 10 ** rng.uniform(np.log10(min_scale), 0.0, size=n_pairs)
    y = np.mod(x + r[:, np.newaxis] * direction, 2 * np.pi)
    gap = np.linalg.norm(evaluate_at(field, x) - evaluate_at(field, y), axis=1)
    return float(np.max(gap / (r * (1 + np.maximum(np.log(1 / r), 0.0)))))


def check_log_lipschitz(cfg, rng, n_pairs=2000):
    ens = build_ensemble(cfg, 0.0)
    force = gradient(solve_poisson(total_density(ens)))
    coarse = log_lipschitz_modulus(force, rng, n_pairs, 1e-4)
    fine = log_lipschitz_modulus(force, rng, 2 * n_pairs, 1e-6)
    if coarse == 0:
        return [CheckResult("log_lipschitz", True, 0.0, STABILITY_TOLERANCE, detail="force vanishes")]
    change = abs(fine - coarse) / coarse
    return [_bounded("log_lipschitz", change, STABILITY_TOLERANCE, f"modulus {coarse:.4g} -> {fine:.4g}")]


def check_pair_run(cfg, eps, directory):
    """Conservation, coupling and Osgood stability on a run and its dt/2 refinement."""
    report = run_pair(cfg, eps, output_dir=directory / "coarse").to_dict()
    if report["aborted"]:
        reason = f"run aborted at t={report['truncation_time']}: {report['abort_reason']}"
        names = list(CONSERVATION_LIMITS) + ["energy_drift", "coupling_bound", "consistency", "osgood_refinement"]
        return [CheckResult(name, False, detail=reason) for name in names]

    rows = report["rows"]
    checks = [
        _bounded(key, max(row[key] for row in rows), limit) for key, limit in CONSERVATION_LIMITS.items()
    ]
    energy0 = rows[0]["energy_vm"]
    drift = max(abs(row["energy_vm"] - energy0) for row in rows) / max(abs(energy0), 1e-300)
    checks.append(_bounded("energy_drift", drift, ENERGY_DRIFT_LIMIT))
    violations = sum(1 for row in rows if not row["coupling_holds"])
    checks.append(_bounded("coupling_bound", violations, 0, f"{len(rows)} snapshots"))
    residual = max(max(row["residual_vm"], row["residual_vp"]) for row in rows)
    checks.append(_bounded("consistency", residual, CONSISTENCY_LIMIT))

    refined_cfg = cfg.replace(
        dt=TimeGrid(cfg.t_final, cfg.dt).refined().dt, snapshot_every=2 * cfg.snapshot_every
    )
    refined = run_pair(refined_cfg, eps, output_dir=directory / "refined").to_dict()
    if refined["aborted"]:
        checks.append(CheckResult("osgood_refinement", False, detail="refined run aborted"))
    else:
        diagnostic = osgood_diagnostic(report, refined)
        checks.append(
            _bounded(
                "osgood_refinement",
                diagnostic.relative_change,
                STABILITY_TOLERANCE,
                f"C={diagnostic.c:.4g}, refined C={diagnostic.refined_c:.4g}",
            )
        )
    return checks


def check_gate_abort(cfg, eps):
    """Data pushed past the validity gate must abort."""
    ens = build_ensemble(cfg, eps)
    sup_xi = gate_value(ens.with_eps(1.0))
    if sup_xi == 0:
        return [CheckResult("gate_abort", True, expected_fail=True, detail="velocity data vanish")]
    bad_eps = 2 * GATE_LIMIT / sup_xi
    try:
        check_state(ens.with_eps(bad_eps), time=0.0)
    except NumericalAbort as e:
        return [CheckResult("gate_abort", True, bad_eps, GATE_LIMIT, expected_fail=True, detail=str(e))]
    return [CheckResult("gate_abort", False, bad_eps, GATE_LIMIT, expected_fail=True, detail="no abort")]


# transport


def brute_force_w2(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    cost = cost_matrix(mu, nu)
    permutations = np.array(list(itertools.permutations(range(nu.n))))
    best = cost[np.arange(mu.n), permutations].mean(axis=1).min()
    return float(np.sqrt(best))


def _random_measure(rng, n, dim=2):
    return EmpiricalMeasure(rng.uniform(0, 2 * np.pi, size=(n, dim)), rng.normal(size=(n, dim)))


def check_transport(
    rng, n_instances=VERIFY_SIZES["ot_instances"], n_triples=VERIFY_SIZES["ot_triples"], max_points=8
):
    """Assignment against the permutation minimum, then the metric axioms on triples."""
    error = 0.0
    for _ in range(n_instances):
        n = int(rng.integers(1, max_points + 1))
        mu, nu = _random_measure(rng, n), _random_measure(rng, n)
        error = max(error, abs(w2_exact(mu, nu) - brute_force_w2(mu, nu)))
    identity, symmetry, triangle = 0.0, 0.0, -np.inf
    for _ in range(n_triples):
        n = int(rng.integers(1, max_points + 1))
        mu, nu, rho = (_random_measure(rng, n) for _ in range(3))
        identity = max(identity, w2_exact(mu, mu))
        symmetry = max(symmetry, abs(w2_exact(mu, nu) - w2_exact(nu, mu)))
        triangle = max(triangle, w2_exact(mu, rho) - w2_exact(mu, nu) - w2_exact(nu, rho))
    return [
        _bounded("ot_brute_force", error, EXACTNESS_LIMIT),
        _bounded("ot_identity", identity, EXACTNESS_LIMIT),
        _bounded("ot_symmetry", symmetry, EXACTNESS_LIMIT),
        _bounded("ot_triangle", triangle, TRIANGLE_LIMIT),
    ]


def check_loeper(
    seed, n_pairs=VERIFY_SIZES["loeper_pairs"], n_samples=VERIFY_SIZES["loeper_samples"], cutoff=8
):
    rng = seeded_rng(seed, "verify", "loeper")
    passed = 0
    worst = 0.0
    for i in range(n_pairs):
        rho1 = random_density(rng, 2, cutoff)
        rho2 = random_density(rng, 2, cutoff)
        result = loeper_check(rho1, rho2, n_samples=n_samples, seed=seed + i)
        passed += result.passed
        if result.rhs > 0:
            worst = max(worst, result.lhs / result.rhs)
    return [
        CheckResult(
            "loeper",
            passed == n_pairs,
            measured=worst,
            threshold=1.1,
            detail=f"{passed}/{n_pairs} pairs pass",
        )
    ]


def verify_suite(cfg: RunConfig, faults=(), output_dir=None, sizes=None) -> VerifyReport:
    """Run every check on ``cfg``; ``faults`` names deliberate breakages to inject.

    ``sizes`` overrides entries of ``VERIFY_SIZES``.
    """
    unknown = set(faults) - set(FAULTS)
    if unknown:
        raise ValidationError({"faults": f"unknown faults {sorted(unknown)}, expected {list(FAULTS)}"})
    unknown = set(sizes or {}) - set(VERIFY_SIZES)
    if unknown:
        raise ValidationError({"sizes": f"unknown sizes {sorted(unknown)}, expected {list(VERIFY_SIZES)}"})
    sizes = {**VERIFY_SIZES, **(sizes or {})}
    eps = cfg.eps[0]
    directory = Path(output_dir) if output_dir is not None else resolve_output_dir(cfg.output_dir) / "verify"
    directory.mkdir(parents=True, exist_ok=True)

    def rng(name):
        return seeded_rng(cfg.seed, "verify", name)

    battery = [
        ("norm_algebra", lambda: check_norm_algebra(rng("norms"), n_pairs=sizes["norm_pairs"])),
        ("projections", lambda: check_projections(rng("projections"), n_fields=sizes["projection_fields"])),
        ("wave_oscillator", check_wave_oscillator),
        ("gauge", lambda: check_gauge(cfg, eps, faults)),
        ("velocity_bound", lambda: check_velocity_bound(rng("velocity"), cfg.eps)),
        ("log_lipschitz", lambda: check_log_lipschitz(cfg, rng("log_lipschitz"))),
        ("pair_run", lambda: check_pair_run(cfg, eps, directory)),
        ("gate_abort", lambda: check_gate_abort(cfg, eps)),
        (
            "transport",
            lambda: check_transport(
                rng("transport"), n_instances=sizes["ot_instances"], n_triples=sizes["ot_triples"]
            ),
        ),
        (
            "loeper",
            lambda: check_loeper(
                cfg.seed, n_pairs=sizes["loeper_pairs"], n_samples=sizes["loeper_samples"]
            ),
        ),
    ]
    report = VerifyReport()
    for name, check in battery:
        try:
            report.checks.extend(check())
        except Exception as e:
            logging.exception(f"Check {name} raised")
            report.checks.append(CheckResult(name, False, detail=f"{type(e).__name__}: {e}"))
    report.write(directory)
    for result in report.failures:
        logging.warning(f"Check {result.name} failed: measured={result.measured} threshold={result.threshold}")
    logging.info(f"Verification finished: {len(report.checks) - len(report.failures)}/{len(report.checks)} pass")
    return report
